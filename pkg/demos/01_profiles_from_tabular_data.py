"""Narrative profiling walkthrough.

Builds per-feature distribution summaries from a small tabular dataset,
renders them into the profiling prompt, and asks a (mock) LLM backend for
the narrative paragraph. Swap the MockBackend for a LiveBackend pointed at
any chat-completions endpoint to generate real profiles.
"""

import numpy as np

from adarec import (
    MockBackend,
    build_profiling_prompt,
    compute_summaries,
    generate_profile,
    render_distribution_text,
)
from adarec.dataset import Dataset, FeatureDescriptor, FeatureSchema, Record

rng = np.random.default_rng(3)

schema = FeatureSchema(
    features=(
        FeatureDescriptor("purchases_360d", "numeric",
                          "Number of category purchased in the last 360 days"),
        FeatureDescriptor("app_visits_30d", "numeric",
                          "Total mobile app visits in the last 30 days"),
        FeatureDescriptor("membership_tier", "categorical"),
    ),
    target_name="responded",
    target_kind="binary",
)

tiers = ["basic", "plus", "premium"]
records = tuple(
    Record(
        f"u{i:03d}",
        (
            float(rng.poisson(11)),
            float(rng.poisson(40)),
            tiers[int(rng.integers(0, 3))],
        ),
        int(rng.random() < 0.5),
    )
    for i in range(400)
)
dataset = Dataset(schema, records)

summaries = compute_summaries(dataset)
for s in summaries:
    print(f"{s.feature_name}: kind={s.kind} present={s.n_present}")

distribution_text = render_distribution_text(summaries)
print("\n--- distribution text ---")
print(distribution_text)

prompt = build_profiling_prompt(distribution_text, dataset.records[0], schema)
print("\n--- profiling prompt (first 600 chars) ---")
print(prompt[:600])

# a scripted backend stands in for the LLM; note the whitespace normalization
backend = MockBackend(
    script=[
        "This customer purchases steadily across the year,\n"
        "visits the app often, and holds a premium membership."
    ]
)
profile = generate_profile(backend, prompt, dataset.records[0].user_id)
print("\n--- generated profile ---")
print(profile.text)
