"""Staged neighbor retrieval walkthrough.

Vectorizes a training population (z-scored numerics + one-hot categoricals),
ranks everyone by cosine similarity to one query user, and shows the two
stages (the big importance pool and the smaller causal reference set) plus
the representative cases with the label-diversity guarantee.
"""

from adarec import (
    VectorLayout,
    cosine_similarity,
    select_representative_cases,
    select_stages,
    vectorize,
)
from adarec.synth import make_pipeline_fixture

train, test = make_pipeline_fixture(n_users=800, n_features=20, seed=5, n_test=10)

layout = VectorLayout.fit(train)
print(f"vector dimension: {layout.dimension}")

train_vectors = vectorize(train, layout, scale=True)
query = vectorize(test, layout, scale=True)[0]

eta1_set, eta2_set = select_stages(train_vectors, query, eta1=600, eta2=300)
print(f"query {query.user_id}: eta1 pool {len(eta1_set.entries)}, "
      f"eta2 reference set {len(eta2_set.entries)}")
print("nearest five:", eta1_set.entries[:5])

# the eta2 stage is always a prefix of eta1 under the similarity order
assert eta2_set.entries == eta1_set.entries[: len(eta2_set.entries)]

labels = train.labels()
cases = select_representative_cases(eta2_set, labels, k=5)
print("\nrepresentative cases (id, similarity, label):")
for uid, score in cases.entries:
    print(f"  {uid}  {score:+.4f}  label={cases.labels[uid]}")

# sanity: cosine is symmetric and bounded
a, b = train_vectors[0], train_vectors[1]
assert abs(cosine_similarity(a, b) - cosine_similarity(b, a)) < 1e-12
assert abs(cosine_similarity(a, b)) <= 1.0
