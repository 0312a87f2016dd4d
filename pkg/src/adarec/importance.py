"""Mutual-information feature ranking over the retrieval pool.

Plug-in (histogram) MI in nats over the joint empirical distribution.
Numeric features are discretized with equal-frequency bins whose cut
points come from nearest-rank quantiles; missing values get a dedicated
extra bin.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Hashable, Iterable, Mapping, Sequence

from .dataset import (
    BRAND_SET,
    MISSING_TOKEN,
    NUMERIC,
    Dataset,
    Label,
    nearest_rank,
)
from .errors import LengthMismatch, UnlabeledRow

DEFAULT_BINS = 10


@dataclass(frozen=True)
class MIScore:
    feature_name: str
    score: float  # nats, >= 0
    bins_used: int


def discretize(values: Sequence[float | None], bins: int) -> list[int]:
    """Equal-frequency bin indices; ties at a cut point fall into the lower bin.

    Cut points are the nearest-rank quantiles at i/bins for i=1..bins-1 over
    present values. Missing values land in a dedicated extra bin with
    index ``bins``.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if not values:
        raise ValueError("values must be non-empty")
    present = sorted(v for v in values if v is not None)
    if present:
        cuts = [nearest_rank(present, i / bins) for i in range(1, bins)]
    else:
        cuts = []

    def assign(v: float) -> int:
        # smallest bin whose cut is >= v; values equal to a cut stay below it
        lo, hi = 0, len(cuts)
        while lo < hi:
            mid = (lo + hi) // 2
            if cuts[mid] >= v:
                hi = mid
            else:
                lo = mid + 1
        return lo

    return [bins if v is None else assign(v) for v in values]


def _distribution(symbols: Iterable[Hashable]) -> dict[Hashable, float]:
    counts = Counter(symbols)
    total = sum(counts.values())
    return {s: c / total for s, c in counts.items()}


def entropy(symbols: Sequence[Hashable]) -> float:
    """Plug-in Shannon entropy in nats."""
    if not symbols:
        raise ValueError("symbols must be non-empty")
    probs = _distribution(symbols).values()
    return max(0.0, -math.fsum(p * math.log(p) for p in probs))


def mutual_information(x: Sequence[Hashable], y: Sequence[Hashable]) -> float:
    """Plug-in MI in nats over the joint empirical distribution (0·log0 := 0)."""
    if len(x) != len(y):
        raise LengthMismatch(len(y), len(x))
    if not x:
        raise ValueError("inputs must be non-empty")
    joint = Counter(zip(x, y))
    n = len(x)
    px = _distribution(x)
    py = _distribution(y)
    total = math.fsum(
        (c / n) * math.log((c / n) / (px[a] * py[b])) for (a, b), c in joint.items()
    )
    return max(0.0, total)


def _feature_symbols(dataset: Dataset, idx: int, bins: int) -> tuple[list[Hashable], int]:
    feat = dataset.schema.features[idx]
    column = [rec.values[idx] for rec in dataset.records]
    if feat.kind == NUMERIC:
        return list(discretize(column, bins)), bins
    symbols = [MISSING_TOKEN if v is None else v for v in column]
    return symbols, len(set(symbols))


def _target_symbol_lists(
    dataset: Dataset, labels: Mapping[str, Label]
) -> list[list[Hashable]]:
    """One symbol list per MI evaluation of the target.

    Binary targets give a single 0/1 list. Brand-set targets are reduced
    per brand to clicked/not-clicked; the caller takes the max across the
    returned lists.
    """
    ordered = [labels[rec.user_id] for rec in dataset.records]
    if dataset.schema.target_kind == BRAND_SET:
        brands = sorted(set().union(*ordered)) if ordered else []
        return [[int(brand in s) for s in ordered] for brand in brands] or [[0] * len(ordered)]
    return [list(ordered)]


def rank_features(
    pool: Dataset,
    labels: Mapping[str, Label] | None = None,
    bins: int = DEFAULT_BINS,
) -> list[MIScore]:
    """MI of every feature against the target, sorted descending (ties by name)."""
    if not pool.records:
        raise ValueError("pool must be non-empty")
    if labels is None:
        labels = pool.labels()
    for rec in pool.records:
        if rec.user_id not in labels:
            raise UnlabeledRow(rec.user_id)

    target_lists = _target_symbol_lists(pool, labels)
    scores = []
    for idx, feat in enumerate(pool.schema.features):
        symbols, used = _feature_symbols(pool, idx, bins)
        score = max(mutual_information(symbols, t) for t in target_lists)
        scores.append(MIScore(feat.name, score, used))
    scores.sort(key=lambda s: (-s.score, s.feature_name))
    return scores


def write_ranking(scores: Iterable[MIScore], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(
            [{"feature": s.feature_name, "score": s.score} for s in scores],
            fh,
            indent=2,
        )
        fh.write("\n")
