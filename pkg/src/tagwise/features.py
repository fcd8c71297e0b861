"""Per-second feature extraction from 50-sample sensor bursts.

Each one-second record is reduced to eight features: per-axis burst means
of the accelerometer (AX, AY, AZ), the vectorial dynamic body acceleration
of the burst (VEDBA), per-axis burst variances of the gyroscope
(GX, GY, GZ), and the VeDBA calculation applied to the gyroscope axes
(GVEDBA).

Windowing note: VeDBA is computed with the one-second burst as its window,
i.e. the static component is the within-burst mean. Much of the VeDBA
literature smooths the static component over several seconds; this toolkit
deliberately keeps a single windowing concept (the per-second segment) so
that every feature is a pure function of one burst.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import ShapeError

SAMPLES_PER_BURST = 50


class FeatureId(IntEnum):
    """The eight features, in canonical index order.

    The order is a public contract: subset bitmasks, CSV columns, and the
    argument order of generated classifiers all index into it.
    """

    AX = 0
    AY = 1
    AZ = 2
    VEDBA = 3
    GX = 4
    GY = 5
    GZ = 6
    GVEDBA = 7

    @property
    def display_name(self) -> str:
        return _DISPLAY_NAMES[self]

    @classmethod
    def from_name(cls, name: str) -> "FeatureId":
        try:
            return _NAME_LOOKUP[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown feature name: {name!r}") from None


_DISPLAY_NAMES = {
    FeatureId.AX: "AX",
    FeatureId.AY: "AY",
    FeatureId.AZ: "AZ",
    FeatureId.VEDBA: "VeDBA",
    FeatureId.GX: "GX",
    FeatureId.GY: "GY",
    FeatureId.GZ: "GZ",
    FeatureId.GVEDBA: "GVeDBA",
}
_NAME_LOOKUP = {f.name: f for f in FeatureId}

FEATURE_COUNT = len(FeatureId)
FULL_MASK: tuple[FeatureId, ...] = tuple(FeatureId)

# Mask strings in reports list gyroscope features first, matching the
# established table layout for these rankings; FeatureId order stays the
# indexing contract everywhere else.
REPORT_ORDER: tuple[FeatureId, ...] = (
    FeatureId.GX,
    FeatureId.GY,
    FeatureId.GZ,
    FeatureId.AX,
    FeatureId.AY,
    FeatureId.AZ,
    FeatureId.VEDBA,
    FeatureId.GVEDBA,
)


def _check_burst(burst: np.ndarray, expected_shape: tuple[int, ...]) -> np.ndarray:
    arr = np.asarray(burst, dtype=np.float64)
    if arr.shape != expected_shape:
        raise ShapeError(f"expected shape {expected_shape}, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ShapeError("burst contains non-finite samples")
    return arr


def segment_mean(burst) -> float:
    """Arithmetic mean of one 50-sample burst."""
    arr = _check_burst(burst, (SAMPLES_PER_BURST,))
    return float(arr.mean())


def segment_var(burst) -> float:
    """Population variance (divide by N=50) of one 50-sample burst.

    Samples are shifted by the first one before averaging, so a constant
    burst yields exactly 0 regardless of its binary representation.
    """
    arr = _check_burst(burst, (SAMPLES_PER_BURST,))
    shifted = arr - arr[0]
    centred = shifted - shifted.mean()
    return float((centred**2).mean())


def vedba(acc_burst) -> float:
    """Vectorial dynamic body acceleration of a 3x50 accelerometer burst.

    The static component of each axis is the within-burst mean; the result
    is the mean magnitude of the per-sample dynamic (mean-removed) vector.
    Always >= 0, and exactly 0 for constant bursts (first-sample shift).
    """
    arr = _check_burst(acc_burst, (3, SAMPLES_PER_BURST))
    shifted = arr - arr[:, :1]
    dynamic = shifted - shifted.mean(axis=1, keepdims=True)
    return float(np.sqrt((dynamic**2).sum(axis=0)).mean())


def gvedba(gyro_burst) -> float:
    """The VeDBA calculation applied to a 3x50 gyroscope burst."""
    return vedba(gyro_burst)


@dataclass(frozen=True)
class FeatureVector:
    """One row of the feature matrix: eight values plus label and time."""

    values: np.ndarray  # shape (8,), indexed by FeatureId
    label: int
    timestamp: int

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (FEATURE_COUNT,):
            raise ShapeError(f"feature vector must have {FEATURE_COUNT} values")
        if not np.isfinite(vals).all():
            raise ShapeError("feature vector contains non-finite values")
        for fid in (FeatureId.VEDBA, FeatureId.GX, FeatureId.GY, FeatureId.GZ, FeatureId.GVEDBA):
            if vals[fid] < 0:
                raise ShapeError(f"{fid.name} must be >= 0, got {vals[fid]}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __eq__(self, other):
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return (
            self.label == other.label
            and self.timestamp == other.timestamp
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class FeatureMatrix:
    """Ordered feature rows with their behaviour name table.

    Stored columnar for speed: ``values`` is (n, 8) float64, ``labels`` and
    ``timestamps`` are (n,) integer arrays aligned with it.
    """

    values: np.ndarray
    labels: np.ndarray
    timestamps: np.ndarray
    behaviours: tuple[str, ...]

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        ts = np.asarray(self.timestamps, dtype=np.int64)
        if vals.ndim != 2 or vals.shape[1] != FEATURE_COUNT:
            raise ShapeError(f"values must be (n, {FEATURE_COUNT}), got {vals.shape}")
        if labels.shape != (vals.shape[0],) or ts.shape != (vals.shape[0],):
            raise ShapeError("labels/timestamps must align with values rows")
        if not np.isfinite(vals).all():
            raise ShapeError("feature matrix contains non-finite values")
        for fid in (FeatureId.VEDBA, FeatureId.GX, FeatureId.GY, FeatureId.GZ, FeatureId.GVEDBA):
            if len(vals) and vals[:, fid].min() < 0:
                raise ShapeError(f"{fid.name} column must be >= 0")
        if len(labels) and (labels.min() < 0 or labels.max() >= len(self.behaviours)):
            raise ShapeError("label index out of range of behaviour list")
        for arr, name in ((vals, "values"), (labels, "labels"), (ts, "timestamps")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "behaviours", tuple(self.behaviours))

    def __len__(self) -> int:
        return self.values.shape[0]

    def row(self, i: int) -> FeatureVector:
        return FeatureVector(self.values[i].copy(), int(self.labels[i]), int(self.timestamps[i]))

    def __iter__(self):
        return (self.row(i) for i in range(len(self)))


def featurize(ds) -> FeatureMatrix:
    """Compute the 8-feature row for every record of a dataset.

    Order- and length-preserving: row t corresponds to record t.
    """
    n = len(ds.records)
    acc = np.stack([r.acc for r in ds.records]) if n else np.empty((0, 3, SAMPLES_PER_BURST))
    gyro = np.stack([r.gyro for r in ds.records]) if n else np.empty((0, 3, SAMPLES_PER_BURST))
    values = np.empty((n, FEATURE_COUNT), dtype=np.float64)
    if n:
        # Same shifted formulas as the per-burst ops, vectorized over records.
        values[:, FeatureId.AX : FeatureId.AZ + 1] = acc.mean(axis=2)
        acc_shift = acc - acc[:, :, :1]
        acc_dyn = acc_shift - acc_shift.mean(axis=2, keepdims=True)
        values[:, FeatureId.VEDBA] = np.sqrt((acc_dyn**2).sum(axis=1)).mean(axis=1)
        gyro_shift = gyro - gyro[:, :, :1]
        gyro_dyn = gyro_shift - gyro_shift.mean(axis=2, keepdims=True)
        values[:, FeatureId.GX : FeatureId.GZ + 1] = (gyro_dyn**2).mean(axis=2)
        values[:, FeatureId.GVEDBA] = np.sqrt((gyro_dyn**2).sum(axis=1)).mean(axis=1)
    labels = np.array([r.label for r in ds.records], dtype=np.int64)
    timestamps = np.array([r.timestamp for r in ds.records], dtype=np.int64)
    return FeatureMatrix(values, labels, timestamps, tuple(ds.behaviours))


FEATURE_CSV_HEADER = "timestamp," + ",".join(f.name for f in FeatureId) + ",label"


def features_to_csv(fm: FeatureMatrix) -> str:
    """Feature-matrix CSV text; values at full round-trip precision."""
    lines = [FEATURE_CSV_HEADER]
    for i in range(len(fm)):
        cells = [str(int(fm.timestamps[i]))]
        cells.extend(repr(float(v)) for v in fm.values[i])
        cells.append(fm.behaviours[fm.labels[i]])
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def features_from_csv(text: str, source: str = "feature CSV") -> FeatureMatrix:
    """Parse feature-matrix CSV text; behaviours inferred in appearance order."""
    from .errors import FormatError  # local import avoids a cycle at module load

    lines = text.splitlines()
    if not lines:
        raise FormatError(f"{source}: empty file, header row required")
    if lines[0] != FEATURE_CSV_HEADER:
        raise FormatError(f"{source}: header must be {FEATURE_CSV_HEADER!r}")
    names: list[str] = []
    index: dict[str, int] = {}
    values, labels, timestamps = [], [], []
    for rownum, line in enumerate(lines[1:]):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != FEATURE_COUNT + 2:
            raise FormatError(f"{source}: row {rownum} has {len(cells)} cells")
        try:
            timestamps.append(int(cells[0]))
            values.append([float(c) for c in cells[1:-1]])
        except ValueError:
            raise ValueError(f"{source}: row {rownum}: non-numeric cell") from None
        label = cells[-1]
        if label not in index:
            index[label] = len(names)
            names.append(label)
        labels.append(index[label])
    return FeatureMatrix(
        np.array(values, dtype=np.float64).reshape(len(labels), FEATURE_COUNT),
        np.array(labels, dtype=np.int64),
        np.array(timestamps, dtype=np.int64),
        tuple(names),
    )


def mask_to_string(mask) -> str:
    """Render a feature subset as a semicolon-joined string, e.g. "GX;GZ;AX;"."""
    members = set(mask)
    return "".join(f.display_name + ";" for f in REPORT_ORDER if f in members)


def mask_from_string(text: str) -> tuple[FeatureId, ...]:
    """Parse a semicolon- or comma-joined feature list into a canonical mask."""
    parts = [p for p in text.replace(",", ";").split(";") if p.strip()]
    members = {FeatureId.from_name(p) for p in parts}
    if not members:
        raise ValueError("empty feature mask")
    return tuple(f for f in FeatureId if f in members)
