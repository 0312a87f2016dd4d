"""Vectorization and similarity retrieval: staged neighbor pools and cases.

The vectorization layout is fitted on the training set once so train and
query vectors share one dimension: numeric features first (in schema
order), then a one-hot block per categorical feature over its training
token universe plus a trailing missing slot. Unseen query tokens map to an
all-zero block.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataset import NUMERIC, Dataset, Label
from .errors import DimensionMismatch, EmptyDataset, NotEnoughCases, PoolTooSmall, UnlabeledRow

STAGE_ETA1 = "eta1"
STAGE_ETA2 = "eta2"
STAGE_CASES = "cases"


@dataclass(frozen=True)
class NumericVector:
    user_id: str
    components: tuple[float, ...]

    @property
    def dimension(self) -> int:
        return len(self.components)


@dataclass(frozen=True)
class NeighborSet:
    query_id: str
    entries: tuple[tuple[str, float], ...]  # sorted: similarity desc, id asc
    stage: str  # STAGE_ETA1 | STAGE_ETA2 | STAGE_CASES
    labels: Mapping[str, Label] | None = None  # cases only
    profiles: Mapping[str, str] | None = None  # cases only, set by the pipeline

    def ids(self) -> tuple[str, ...]:
        return tuple(uid for uid, _ in self.entries)

    def to_json(self) -> dict:
        return {
            "query_id": self.query_id,
            "stage": self.stage,
            "entries": [[uid, score] for uid, score in self.entries],
        }


@dataclass(frozen=True)
class VectorLayout:
    """Fitted encoding layout shared by train and query vectorization."""

    numeric_names: tuple[str, ...]
    numeric_means: tuple[float, ...]
    numeric_stds: tuple[float, ...]  # population; 0 is kept and guarded at scale time
    categorical_universes: tuple[tuple[str, tuple[str, ...]], ...]

    @property
    def dimension(self) -> int:
        return len(self.numeric_names) + sum(
            len(tokens) + 1 for _, tokens in self.categorical_universes
        )

    @classmethod
    def fit(cls, dataset: Dataset) -> "VectorLayout":
        if not dataset.records:
            raise EmptyDataset("cannot fit a layout on an empty dataset")
        numeric_names, means, stds = [], [], []
        universes = []
        for idx, feat in enumerate(dataset.schema.features):
            column = [rec.values[idx] for rec in dataset.records]
            present = [v for v in column if v is not None]
            if feat.kind == NUMERIC:
                numeric_names.append(feat.name)
                if present:
                    mean = math.fsum(present) / len(present)
                    var = math.fsum((v - mean) ** 2 for v in present) / len(present)
                else:
                    mean, var = 0.0, 0.0
                means.append(mean)
                stds.append(math.sqrt(var))
            else:
                universes.append((feat.name, tuple(sorted(set(present)))))
        return cls(tuple(numeric_names), tuple(means), tuple(stds), tuple(universes))


def vectorize(
    dataset: Dataset, layout: VectorLayout | None = None, scale: bool = False
) -> list[NumericVector]:
    """Encode every record as a fixed-width numeric vector.

    Numeric slots are copied (missing becomes 0); with ``scale=True`` they
    are z-scored with the layout's training statistics and missing
    becomes 0 in the scaled space (the training mean). Each categorical
    feature becomes a one-hot block over its training universe plus a
    missing slot; unseen tokens leave the whole block zero.
    """
    if not dataset.records:
        raise EmptyDataset("cannot vectorize an empty dataset")
    if layout is None:
        layout = VectorLayout.fit(dataset)

    numeric_idx = [dataset.schema.index_of(n) for n in layout.numeric_names]
    cat_idx = [(dataset.schema.index_of(n), tokens) for n, tokens in layout.categorical_universes]

    out = []
    for rec in dataset.records:
        comps: list[float] = []
        for pos, mean, std in zip(numeric_idx, layout.numeric_means, layout.numeric_stds):
            v = rec.values[pos]
            if v is None:
                comps.append(0.0)
            elif scale:
                comps.append((v - mean) / std if std > 0 else 0.0)
            else:
                comps.append(float(v))
        for pos, tokens in cat_idx:
            v = rec.values[pos]
            block = [0.0] * (len(tokens) + 1)
            if v is None:
                block[-1] = 1.0
            elif v in tokens:
                block[tokens.index(v)] = 1.0
            # unseen token: leave the block all-zero
            comps.extend(block)
        out.append(NumericVector(rec.user_id, tuple(comps)))
    return out


def cosine_similarity(a: NumericVector, b: NumericVector) -> float:
    """Cosine of the angle between two vectors; 0 if either norm is 0."""
    if a.dimension != b.dimension:
        raise DimensionMismatch(b.dimension, a.dimension)
    av = np.asarray(a.components)
    bv = np.asarray(b.components)
    denom = float(np.linalg.norm(av) * np.linalg.norm(bv))
    if denom == 0.0:
        return 0.0
    return float(np.dot(av, bv) / denom)


def _ranked_pool(
    train: Sequence[NumericVector], query: NumericVector
) -> list[tuple[str, float]]:
    pool = [v for v in train if v.user_id != query.user_id]
    if not pool:
        return []
    matrix = np.asarray([v.components for v in pool])
    if matrix.shape[1] != query.dimension:
        raise DimensionMismatch(int(matrix.shape[1]), query.dimension)
    q = np.asarray(query.components)
    norms = np.linalg.norm(matrix, axis=1) * np.linalg.norm(q)
    dots = matrix @ q
    sims = np.divide(dots, norms, out=np.zeros_like(dots), where=norms > 0)
    ids = np.asarray([v.user_id for v in pool])
    order = np.lexsort((ids, -sims))
    return [(str(ids[k]), float(sims[k])) for k in order]


def select_stages(
    train: Sequence[NumericVector],
    query: NumericVector,
    eta1: int,
    eta2: int,
) -> tuple[NeighborSet, NeighborSet]:
    """Top-eta1 and top-eta2 neighbor sets; the eta2 set is a prefix of eta1.

    Entries are sorted by descending similarity, ties broken by ascending
    user_id; the query itself is excluded from the pool.
    """
    if not (0 < eta2 < eta1):
        raise PoolTooSmall(f"need 0 < eta2 < eta1, got eta1={eta1}, eta2={eta2}")
    ranked = _ranked_pool(train, query)
    if eta1 > len(ranked):
        raise PoolTooSmall(f"eta1={eta1} exceeds pool of {len(ranked)} candidates")
    top1 = tuple(ranked[:eta1])
    return (
        NeighborSet(query.user_id, top1, STAGE_ETA1),
        NeighborSet(query.user_id, top1[:eta2], STAGE_ETA2),
    )


def select_representative_cases(
    eta2_set: NeighborSet, labels: Mapping[str, Label], k: int
) -> NeighborSet:
    """The k most similar labeled cases, with a label-diversity guarantee.

    For binary targets: if all k nearest share one label and a
    differently-labeled user exists in the eta2 set, the k-th slot is
    replaced by the most similar such user. Brand-set targets keep the
    plain top-k.
    """
    if k > len(eta2_set.entries):
        raise NotEnoughCases(f"k={k} exceeds eta2 set of {len(eta2_set.entries)}")
    for uid, _ in eta2_set.entries:
        if uid not in labels:
            raise UnlabeledRow(uid)

    chosen = list(eta2_set.entries[:k])
    is_binary = bool(chosen) and isinstance(labels[chosen[0][0]], int)
    if is_binary and k >= 1:
        seen = {labels[uid] for uid, _ in chosen}
        if len(seen) == 1:
            lone = next(iter(seen))
            swap = next(
                (e for e in eta2_set.entries[k:] if labels[e[0]] != lone), None
            )
            if swap is not None:
                chosen[-1] = swap

    case_labels = {uid: labels[uid] for uid, _ in chosen}
    return NeighborSet(eta2_set.query_id, tuple(chosen), STAGE_CASES, labels=case_labels)


def with_profiles(cases: NeighborSet, profiles: Mapping[str, str]) -> NeighborSet:
    """Attach per-case profile texts (pattern-analysis rendering input)."""
    return replace(cases, profiles=dict(profiles))


def write_neighbor_sets(sets: Iterable[NeighborSet], path: str | Path) -> None:
    """Audit export: one JSON line per neighbor set."""
    with open(path, "w", encoding="utf-8") as fh:
        for ns in sets:
            fh.write(json.dumps(ns.to_json(), ensure_ascii=False) + "\n")
