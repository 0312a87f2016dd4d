"""Tabular user-feature data: schema, loading, validation, and summaries.

A dataset is immutable after load. Missing cells are represented as ``None``
and are excluded from summaries; they are only imputed downstream at
vectorization time (see :mod:`adarec.retrieval`).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import (
    DuplicateUserId,
    EmptyDataset,
    MissingColumn,
    TypeMismatch,
    UnknownColumn,
)

NUMERIC = "numeric"
CATEGORICAL = "categorical"
BINARY = "binary"
BRAND_SET = "brand_set"

ID_COLUMN = "user_id"
LABEL_COLUMN = "label"
MISSING_TOKEN = "__missing__"

#: A cell value: a finite float, a category token, or None for missing.
FeatureValue = float | str | None

#: A target value: 0/1 for binary tasks, a set of brand tokens otherwise.
Label = int | frozenset


@dataclass(frozen=True)
class FeatureDescriptor:
    name: str
    kind: str  # NUMERIC | CATEGORICAL
    description: str | None = None


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[FeatureDescriptor, ...]
    target_name: str
    target_kind: str  # BINARY | BRAND_SET

    def __post_init__(self):
        names = [f.name for f in self.features]
        if any(not n for n in names):
            raise ValueError("feature names must be non-empty")
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        if self.target_name in names:
            raise ValueError("target_name must not be among the features")
        for f in self.features:
            if f.kind not in (NUMERIC, CATEGORICAL):
                raise ValueError(f"unknown feature kind {f.kind!r}")
        if self.target_kind not in (BINARY, BRAND_SET):
            raise ValueError(f"unknown target kind {self.target_kind!r}")

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def index_of(self, name: str) -> int:
        return self.feature_names.index(name)

    @classmethod
    def from_json(cls, doc: Mapping) -> "FeatureSchema":
        feats = tuple(
            FeatureDescriptor(f["name"], f["kind"], f.get("description"))
            for f in doc["features"]
        )
        return cls(feats, doc["target"]["name"], doc["target"]["kind"])

    def to_json(self) -> dict:
        return {
            "features": [
                {"name": f.name, "kind": f.kind, "description": f.description}
                for f in self.features
            ],
            "target": {"name": self.target_name, "kind": self.target_kind},
        }

    @classmethod
    def load(cls, path: str | Path) -> "FeatureSchema":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")


@dataclass(frozen=True)
class Record:
    user_id: str
    values: tuple[FeatureValue, ...]
    label: Label | None = None


@dataclass(frozen=True)
class Dataset:
    schema: FeatureSchema
    records: tuple[Record, ...]
    role: str = "train"  # train | validation | test

    def __post_init__(self):
        width = len(self.schema.features)
        seen = set()
        for rec in self.records:
            if len(rec.values) != width:
                raise ValueError(
                    f"record {rec.user_id!r} has {len(rec.values)} values, schema has {width}"
                )
            if rec.user_id in seen:
                raise DuplicateUserId(rec.user_id)
            seen.add(rec.user_id)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> list[FeatureValue]:
        idx = self.schema.index_of(name)
        return [rec.values[idx] for rec in self.records]

    def labels(self) -> dict[str, Label]:
        return {r.user_id: r.label for r in self.records if r.label is not None}

    def subset(self, user_ids: Iterable[str]) -> "Dataset":
        wanted = set(user_ids)
        return Dataset(
            self.schema,
            tuple(r for r in self.records if r.user_id in wanted),
            self.role,
        )


@dataclass(frozen=True)
class DistributionSummary:
    feature_name: str
    kind: str
    n_present: int
    n_missing: int
    # numeric case (None for categorical or when nothing is present)
    mean: float | None = None
    std_dev: float | None = None
    min: float | None = None
    max: float | None = None
    q25: float | None = None
    median: float | None = None
    q75: float | None = None
    # categorical case: (token, count) sorted by count desc then token asc
    frequencies: tuple[tuple[str, int], ...] = field(default=())
    mode: str | None = None

    def to_json(self) -> dict:
        doc = {
            "feature": self.feature_name,
            "kind": self.kind,
            "n_present": self.n_present,
            "n_missing": self.n_missing,
        }
        if self.kind == NUMERIC:
            doc.update(
                mean=self.mean, std_dev=self.std_dev, min=self.min, max=self.max,
                q25=self.q25, median=self.median, q75=self.q75,
            )
        else:
            doc["frequencies"] = [[t, c] for t, c in self.frequencies]
            doc["mode"] = self.mode
        return doc


def nearest_rank(sorted_values: Sequence[float], q: float) -> float:
    """Nearest-rank quantile: the value at rank ceil(q*n), 1-indexed.

    ``sorted_values`` must be sorted ascending and non-empty; 0 < q <= 1.
    """
    n = len(sorted_values)
    rank = max(1, math.ceil(q * n))
    return sorted_values[rank - 1]


def _parse_cell(raw: str, kind: str, row: int, column: str) -> FeatureValue:
    if raw == "":
        return None
    if kind == CATEGORICAL:
        return raw
    try:
        value = float(raw)
    except ValueError:
        raise TypeMismatch(row, column, f"{raw!r} is not numeric") from None
    if not math.isfinite(value):
        raise TypeMismatch(row, column, f"{raw!r} is not finite")
    return value


def _parse_label(raw: str, target_kind: str, row: int) -> Label | None:
    if raw == "":
        return None
    if target_kind == BINARY:
        if raw not in ("0", "1"):
            raise TypeMismatch(row, LABEL_COLUMN, f"{raw!r} is not 0/1")
        return int(raw)
    tokens = [t for t in raw.split("|") if t]
    if not tokens:
        return None
    return frozenset(tokens)


def load_csv(path: str | Path, schema: FeatureSchema, role: str = "train") -> Dataset:
    """Load a UTF-8 comma-delimited CSV whose header matches the schema.

    Columns may appear in any order; they are re-ordered to schema order.
    Requires a ``user_id`` column; a ``label`` column is optional. Empty
    cells become missing values.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset(f"{path} has no header row") from None

        known = set(schema.feature_names) | {ID_COLUMN, LABEL_COLUMN}
        for col in header:
            if col not in known:
                raise UnknownColumn(col)
        position = {col: i for i, col in enumerate(header)}
        if ID_COLUMN not in position:
            raise MissingColumn(ID_COLUMN)
        for name in schema.feature_names:
            if name not in position:
                raise MissingColumn(name)
        has_label = LABEL_COLUMN in position

        records = []
        seen_ids: set[str] = set()
        for row_no, row in enumerate(reader, start=1):
            user_id = row[position[ID_COLUMN]]
            if user_id in seen_ids:
                raise DuplicateUserId(user_id, row_no)
            seen_ids.add(user_id)
            values = tuple(
                _parse_cell(row[position[f.name]], f.kind, row_no, f.name)
                for f in schema.features
            )
            label = (
                _parse_label(row[position[LABEL_COLUMN]], schema.target_kind, row_no)
                if has_label
                else None
            )
            records.append(Record(user_id, values, label))

    return Dataset(schema, tuple(records), role)


def _format_cell(value: FeatureValue) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _format_label(label: Label | None) -> str:
    if label is None:
        return ""
    if isinstance(label, frozenset):
        return "|".join(sorted(label))
    return str(label)


def write_csv(dataset: Dataset, path: str | Path) -> None:
    """Write a Dataset back to CSV; load_csv on the result round-trips."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([ID_COLUMN, *dataset.schema.feature_names, LABEL_COLUMN])
        for rec in dataset.records:
            writer.writerow(
                [rec.user_id]
                + [_format_cell(v) for v in rec.values]
                + [_format_label(rec.label)]
            )


def compute_summaries(dataset: Dataset) -> list[DistributionSummary]:
    """One DistributionSummary per feature, in schema order.

    Numeric percentiles use the nearest-rank method on present values;
    std_dev is the population form. Categorical frequencies cover all
    tokens, sorted by descending count then token order.
    """
    if not dataset.records:
        raise EmptyDataset("cannot summarize an empty dataset")

    out = []
    for idx, feat in enumerate(dataset.schema.features):
        column = [rec.values[idx] for rec in dataset.records]
        present = [v for v in column if v is not None]
        n_present = len(present)
        n_missing = len(column) - n_present

        if feat.kind == NUMERIC:
            if n_present == 0:
                out.append(DistributionSummary(feat.name, NUMERIC, 0, n_missing))
                continue
            vals = sorted(present)  # type: ignore[type-var]
            mean = math.fsum(vals) / n_present
            var = math.fsum((v - mean) ** 2 for v in vals) / n_present
            out.append(
                DistributionSummary(
                    feat.name, NUMERIC, n_present, n_missing,
                    mean=mean, std_dev=math.sqrt(var),
                    min=vals[0], max=vals[-1],
                    q25=nearest_rank(vals, 0.25),
                    median=nearest_rank(vals, 0.5),
                    q75=nearest_rank(vals, 0.75),
                )
            )
        else:
            counts: dict[str, int] = {}
            for v in present:
                counts[v] = counts.get(v, 0) + 1
            freq = tuple(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))
            out.append(
                DistributionSummary(
                    feat.name, CATEGORICAL, n_present, n_missing,
                    frequencies=freq, mode=freq[0][0] if freq else None,
                )
            )
    return out
