"""Narrative profiles: distribution text, the profiling prompt, and profile IO.

The numeric sentence template is fixed; downstream snapshot tests depend on
it byte-for-byte. Numbers in distribution text are printed with one decimal
place, rounding half up.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Sequence

from .dataset import (
    CATEGORICAL,
    NUMERIC,
    DistributionSummary,
    FeatureSchema,
    FeatureValue,
    Record,
)
from .errors import EmptyCompletion, ParseError
from .llm_client import Backend, CompletionRequest, LlmSettings

PROFILING_PREAMBLE = (
    "You are a customer profile generator. "
    "Below is the data distribution for each feature:"
)

PROFILING_INSTRUCTIONS = (
    "Using this information, generate a clear and cohesive profile for the "
    "customer. For non-numerical features, emphasize specific values. "
    "For numerical features, describe relative trends without exact numbers. "
    "Present as a single fluid paragraph without extra formatting."
)

NUMERIC_SENTENCE = (
    "'{name}' has a mean value of {mean} with a standard deviation of {std}. "
    "The minimum observed value is {min}, while the maximum is {max}. "
    "Approximately 25% of values are below {q25}, the median (50th percentile) "
    "is {median}, and 75% fall below {q75}."
)


@dataclass(frozen=True)
class NarrativeProfile:
    user_id: str
    text: str
    source: str  # "generated" | "expert"
    generator_model: str | None = None

    def __post_init__(self):
        if not self.text:
            raise ValueError("profile text must be non-empty")


def _one_decimal(x: float) -> str:
    return str(Decimal(repr(x)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def format_raw_value(value: FeatureValue) -> str:
    """Exact-value rendering for the prompt's raw-value block."""
    if value is None:
        return "missing"
    if isinstance(value, float):
        return str(int(value)) if value.is_integer() else repr(value)
    return str(value)


def render_distribution_text(summaries: Sequence[DistributionSummary]) -> str:
    """One sentence block per feature, joined by single spaces in schema order."""
    if not summaries:
        raise ValueError("summaries must be non-empty")
    blocks = []
    for s in summaries:
        if s.kind == NUMERIC:
            blocks.append(
                NUMERIC_SENTENCE.format(
                    name=s.feature_name,
                    mean=_one_decimal(s.mean),
                    std=_one_decimal(s.std_dev),
                    min=_one_decimal(s.min),
                    max=_one_decimal(s.max),
                    q25=_one_decimal(s.q25),
                    median=_one_decimal(s.median),
                    q75=_one_decimal(s.q75),
                )
            )
        elif s.kind == CATEGORICAL:
            top = ", ".join(
                f"{token} ({_one_decimal(100.0 * count / s.n_present)}%)"
                for token, count in s.frequencies[:3]
            )
            blocks.append(
                f"'{s.feature_name}' takes {len(s.frequencies)} distinct values; "
                f"the most common are {top}."
            )
        else:
            raise ValueError(f"unknown summary kind {s.kind!r}")
    return " ".join(blocks)


def build_profiling_prompt(
    summaries_text: str, record: Record, schema: FeatureSchema
) -> str:
    """Assemble the full profiling prompt for one user."""
    raw_block = " ".join(
        f"{feat.description or feat.name} is {format_raw_value(value)}."
        for feat, value in zip(schema.features, record.values)
    )
    return "\n\n".join(
        [
            PROFILING_PREAMBLE,
            summaries_text,
            PROFILING_INSTRUCTIONS,
            raw_block,
            "Customer Profile:",
        ]
    )


def normalize_paragraph(text: str) -> str:
    """Collapse all whitespace runs (including newlines) to single spaces."""
    return " ".join(text.split())


def generate_profile(
    client: Backend,
    prompt: str,
    user_id: str,
    settings: LlmSettings | None = None,
) -> NarrativeProfile:
    """Obtain one narrative profile from the backend for the given prompt."""
    settings = settings or LlmSettings()
    response = client.complete(
        CompletionRequest(
            model=settings.model,
            user=prompt,
            system=settings.system,
            temperature=settings.temperature,
            max_tokens=settings.max_tokens,
        )
    )
    text = normalize_paragraph(response.text)
    if not text:
        raise EmptyCompletion(f"backend returned an empty profile for {user_id!r}")
    return NarrativeProfile(user_id, text, "generated", response.model)


def load_expert_profiles(path: str | Path) -> dict[str, NarrativeProfile]:
    """Load hand-authored profiles from a JSON-lines file.

    Each line is ``{"user_id": ..., "text": ...}``; duplicates are an error.
    """
    return _load_profiles(path, source="expert")


def load_profiles(path: str | Path) -> dict[str, NarrativeProfile]:
    """Load previously persisted profiles, honoring any stored source."""
    return _load_profiles(path, source=None)


def _load_profiles(path: str | Path, source: str | None) -> dict[str, NarrativeProfile]:
    profiles: dict[str, NarrativeProfile] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                user_id = doc["user_id"]
                text = doc["text"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(line_no, str(exc)) from None
            if not isinstance(user_id, str) or not isinstance(text, str) or not text:
                raise ParseError(line_no, "user_id and text must be non-empty strings")
            if user_id in profiles:
                raise ParseError(line_no, f"duplicate user_id {user_id!r}")
            profiles[user_id] = NarrativeProfile(
                user_id,
                normalize_paragraph(text),
                source or doc.get("source", "generated"),
                doc.get("generator_model"),
            )
    return profiles


def save_profiles(profiles: Iterable[NarrativeProfile], path: str | Path) -> None:
    """Persist profiles as JSON lines for reuse across runs."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in profiles:
            fh.write(
                json.dumps(
                    {
                        "user_id": p.user_id,
                        "text": p.text,
                        "source": p.source,
                        "generator_model": p.generator_model,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
