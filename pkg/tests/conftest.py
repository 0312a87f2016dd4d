import pytest

from adarec.dataset import (
    BINARY,
    CATEGORICAL,
    NUMERIC,
    Dataset,
    FeatureDescriptor,
    FeatureSchema,
    Record,
)

# 40 integer values with mean 11.2, population std 6.566 (prints 6.6),
# min 0, max 34, and nearest-rank quartiles 6 / 12 / 16: the profiling
# sentence fixture used across dataset and profiling tests.
SNAPSHOT_VALUES = [
    0, 2, 3, 4, 4, 4, 4, 4, 6, 6, 6, 6, 7, 7, 8, 8, 10, 11, 12, 12,
    12, 12, 12, 12, 12, 12, 13, 13, 13, 16, 16, 16, 17, 17, 17, 18, 20, 20, 22, 34,
]


def schema_of(n_numeric: int, n_categorical: int = 0, target_kind: str = BINARY) -> FeatureSchema:
    feats = [FeatureDescriptor(f"num_{i:02d}", NUMERIC) for i in range(n_numeric)]
    feats += [FeatureDescriptor(f"cat_{i:02d}", CATEGORICAL) for i in range(n_categorical)]
    return FeatureSchema(tuple(feats), "label_col", target_kind)


def dataset_from_columns(columns: dict[str, list], target_kind: str = BINARY,
                         labels: list | None = None, role: str = "train") -> Dataset:
    feats = []
    for name, values in columns.items():
        kind = CATEGORICAL if any(isinstance(v, str) for v in values) else NUMERIC
        feats.append(FeatureDescriptor(name, kind))
    schema = FeatureSchema(tuple(feats), "y", target_kind)
    n = len(next(iter(columns.values())))
    records = []
    for row in range(n):
        values = tuple(
            None if columns[f.name][row] is None
            else (columns[f.name][row] if f.kind == CATEGORICAL else float(columns[f.name][row]))
            for f in feats
        )
        records.append(Record(f"u{row:04d}", values, labels[row] if labels else None))
    return Dataset(schema, tuple(records), role)


@pytest.fixture
def snapshot_dataset() -> Dataset:
    return dataset_from_columns(
        {"Number of category purchased in the last 360 days.": SNAPSHOT_VALUES}
    )
