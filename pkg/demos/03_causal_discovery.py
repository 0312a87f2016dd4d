"""Causal structure learning walkthrough.

Samples a known structural causal model, runs the constraint-based search
(skeleton + Possible-D-SEP + orientation), and extracts the top causal
features ranked by mutual information. Also shows the latent-confounder
case: a hidden common cause leaves an edge whose endpoints stay non-tail.
"""

from adarec.causal import encode_dataset, fci_skeleton, orient_pag, causal_features
from adarec.importance import rank_features
from adarec.synth import LINEAR, LOGISTIC, Mechanism, ScmSpec, generate

# --- a small ground-truth model: x1 -> x2 -> y <- x3, x4 independent --------
spec = ScmSpec(
    variables=("x1", "x2", "x3", "x4", "y"),
    edges=(("x1", "x2"), ("x2", "y"), ("x3", "y")),
    mechanisms={
        "x1": Mechanism(LINEAR, (), noise_std=1.0),
        "x2": Mechanism(LINEAR, (("x1", 0.9),), noise_std=0.6),
        "x3": Mechanism(LINEAR, (), noise_std=1.0),
        "x4": Mechanism(LINEAR, (), noise_std=1.0),
        "y": Mechanism(LOGISTIC, (("x2", 2.5), ("x3", 2.5))),
    },
    target="y",
    n=4000,
    seed=11,
)
dataset, truth = generate(spec)
print("true edges:", truth["edges"])

matrix, kinds, names = encode_dataset(dataset)  # appends y as a column
skeleton, sepsets = fci_skeleton(matrix, alpha=0.1, max_depth=3, kinds=kinds, names=names)
pag = orient_pag(skeleton, sepsets)

print("\nlearned PAG edges (mark_at_a, mark_at_b):")
for edge in pag.to_json()["edges"]:
    print(f"  {edge['a']} ({edge['mark_at_a']}) -- ({edge['mark_at_b']}) {edge['b']}")

mi = rank_features(dataset, bins=10)
print("\nmutual information ranking:")
for s in mi:
    print(f"  {s.feature_name}: {s.score:.4f} nats")

feature_set = causal_features(pag, "y", mi, p=3)
print("\ntop causal features adjacent to y:")
for name, score, mark in feature_set.entries:
    print(f"  {name}  MI={score:.4f}  mark at target: {mark}")

# --- hidden confounder: x <- h -> z with h never observed -------------------
conf = ScmSpec(
    variables=("h", "x", "z", "t"),
    edges=(("h", "x"), ("h", "z"), ("x", "t")),
    mechanisms={
        "h": Mechanism(LINEAR, (), noise_std=1.0),
        "x": Mechanism(LINEAR, (("h", 1.0),), noise_std=0.8),
        "z": Mechanism(LINEAR, (("h", 1.0),), noise_std=0.8),
        "t": Mechanism(LOGISTIC, (("x", 1.0),)),
    },
    target="t",
    n=8000,
    seed=13,
    hidden=frozenset(["h"]),
)
ds2, _ = generate(conf)
m2, k2, n2 = encode_dataset(ds2, include_target=False)
sk2, sep2 = fci_skeleton(m2, alpha=0.1, max_depth=3, kinds=k2, names=n2)
pag2 = orient_pag(sk2, sep2)
print("\nhidden-confounder graph over observed x, z:")
for edge in pag2.to_json()["edges"]:
    print(f"  {edge['a']} ({edge['mark_at_a']}) -- ({edge['mark_at_b']}) {edge['b']}")
print("(the x--z edge survives; neither endpoint is a tail)")
