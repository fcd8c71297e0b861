"""Labelled burst time-series data model, CSV format, and synthetic data.

A record is one second of 50 Hz IMU data: 50 samples per axis for the
3-axis accelerometer and gyroscope, plus a behaviour label. Datasets are
ordered collections of records with a shared behaviour name table.

Burst CSV format (one row per second, UTF-8, LF, '.' decimal separator)::

    timestamp,acc_x_00..acc_x_49,acc_y_00..,acc_z_00..,
    gyr_x_00..,gyr_y_00..,gyr_z_00..,label

Sample values are stored in SI units (m/s^2, rad/s) and serialized with up
to six fractional digits, which exceeds 16-bit sensor resolution. Byte
accounting elsewhere in the toolkit uses a fixed 2 bytes/sample instead of
this textual width.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, LabelError, ProtocolError, ShapeError
from .features import SAMPLES_PER_BURST

CSV_DECIMALS = 6

_AXES = ("acc_x", "acc_y", "acc_z", "gyr_x", "gyr_y", "gyr_z")


def _burst_header() -> list[str]:
    cols = ["timestamp"]
    for axis in _AXES:
        cols.extend(f"{axis}_{i:02d}" for i in range(SAMPLES_PER_BURST))
    cols.append("label")
    return cols


BURST_HEADER = _burst_header()


@dataclass(frozen=True)
class SensorRecord:
    """One labelled second: 3x50 accelerometer and gyroscope samples."""

    timestamp: int
    acc: np.ndarray  # (3, 50), m/s^2
    gyro: np.ndarray  # (3, 50), rad/s
    label: int

    def __post_init__(self):
        for name in ("acc", "gyro"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (3, SAMPLES_PER_BURST):
                raise ShapeError(f"{name} must be (3, {SAMPLES_PER_BURST}), got {arr.shape}")
            if not np.isfinite(arr).all():
                raise ShapeError(f"{name} contains non-finite samples")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.label < 0:
            raise LabelError(f"label index must be >= 0, got {self.label}")

    def __eq__(self, other):
        if not isinstance(other, SensorRecord):
            return NotImplemented
        return (
            self.timestamp == other.timestamp
            and self.label == other.label
            and np.array_equal(self.acc, other.acc)
            and np.array_equal(self.gyro, other.gyro)
        )


@dataclass(frozen=True)
class Dataset:
    """Ordered records plus the behaviour name table they index into."""

    records: tuple[SensorRecord, ...]
    behaviours: tuple[str, ...]
    source_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "behaviours", tuple(self.behaviours))
        seen = set()
        for name in self.behaviours:
            if not name or any(c in name for c in ",\n\r"):
                raise LabelError(f"invalid behaviour name: {name!r}")
            if name in seen:
                raise LabelError(f"duplicate behaviour name: {name!r}")
            seen.add(name)
        prev = None
        for i, rec in enumerate(self.records):
            if rec.label >= len(self.behaviours):
                raise LabelError(f"record {i}: label {rec.label} outside behaviour list")
            if prev is not None and rec.timestamp <= prev:
                raise FormatError(f"record {i}: timestamps must be strictly increasing")
            prev = rec.timestamp

    def __len__(self) -> int:
        return len(self.records)


def class_frequency(ds: Dataset, behaviour: str) -> float:
    """Fraction of records labelled with the given behaviour."""
    if behaviour not in ds.behaviours:
        raise LabelError(f"unknown behaviour: {behaviour!r}")
    if not ds.records:
        return 0.0
    idx = ds.behaviours.index(behaviour)
    return sum(1 for r in ds.records if r.label == idx) / len(ds.records)


def _format_value(v: float) -> str:
    s = f"{v:.{CSV_DECIMALS}f}".rstrip("0").rstrip(".")
    return "0" if s in ("", "-0") else s


def export_csv(ds: Dataset, path) -> None:
    """Write a dataset in the burst CSV format (atomic replace)."""
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(BURST_HEADER)
            for rec in ds.records:
                row = [str(rec.timestamp)]
                for arr in (rec.acc, rec.gyro):
                    for axis in arr:
                        row.extend(_format_value(v) for v in axis)
                row.append(ds.behaviours[rec.label])
                writer.writerow(row)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _diagnose_header(header: list[str]) -> str:
    if len(header) != len(BURST_HEADER):
        # Name the first column group whose run length is off.
        for axis in _AXES:
            got = sum(1 for c in header if c.startswith(axis + "_"))
            if got != SAMPLES_PER_BURST:
                return f"column group {axis!r} has {got} columns, expected {SAMPLES_PER_BURST}"
        return f"expected {len(BURST_HEADER)} columns, got {len(header)}"
    for got, want in zip(header, BURST_HEADER):
        if got != want:
            return f"column {want!r} expected, found {got!r}"
    return "header mismatch"


def ingest_csv(path, behaviours=None) -> Dataset:
    """Parse a burst CSV file into a Dataset.

    Behaviour names are inferred in order of first appearance unless an
    explicit list is given, in which case unknown labels raise LabelError.
    """
    declared = tuple(behaviours) if behaviours is not None else None
    names: list[str] = list(declared) if declared else []
    index = {n: i for i, n in enumerate(names)}
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file, header row required") from None
        if header != BURST_HEADER:
            raise FormatError(f"{path}: {_diagnose_header(header)}")
        for rownum, row in enumerate(reader):
            if len(row) != len(BURST_HEADER):
                raise FormatError(
                    f"{path}: row {rownum} has {len(row)} cells, expected {len(BURST_HEADER)}"
                )
            try:
                timestamp = int(row[0])
            except ValueError:
                raise ValueError(f"{path}: row {rownum}: bad timestamp {row[0]!r}") from None
            samples = np.empty(6 * SAMPLES_PER_BURST, dtype=np.float64)
            for j, cell in enumerate(row[1:-1]):
                try:
                    samples[j] = float(cell)
                except ValueError:
                    raise ValueError(
                        f"{path}: row {rownum}: non-numeric cell {cell!r} "
                        f"in column {BURST_HEADER[j + 1]}"
                    ) from None
            if not np.isfinite(samples).all():
                raise ValueError(f"{path}: row {rownum}: non-finite sample value")
            label_name = row[-1]
            if label_name not in index:
                if declared is not None:
                    raise LabelError(f"{path}: row {rownum}: unknown label {label_name!r}")
                index[label_name] = len(names)
                names.append(label_name)
            bursts = samples.reshape(6, SAMPLES_PER_BURST)
            records.append(
                SensorRecord(timestamp, bursts[:3].copy(), bursts[3:].copy(), index[label_name])
            )
    return Dataset(tuple(records), tuple(names), source_id=os.path.basename(str(path)))


# --- synthetic data -------------------------------------------------------

# Gait forcing is distributed over axes with fixed weights; the gyroscope
# picks up a phase-shifted, scaled copy of the same oscillation.
_GAIT_ACC_WEIGHTS = np.array([0.55, 0.25, 1.0])
_GAIT_GYRO_WEIGHTS = np.array([0.5, 0.8, 0.35])
_GAIT_GYRO_COUPLING = 0.12
# Per-second intensity varies with a large common lognormal factor (overall
# vigour of the second) and a small per-axis one; class identity therefore
# sits in the ratios between axes more than in any single magnitude.
_JITTER_COMMON_SIGMA = 0.55
_JITTER_AXIS_SIGMA = 0.15


@dataclass(frozen=True)
class BehaviourProfile:
    """Generator parameters for one behaviour.

    acc_drift is the stddev of a per-second orientation drift added to the
    accelerometer mean; together with the lognormal noise jitter it gives
    each behaviour within-class spread, so classes overlap realistically
    instead of separating at a single threshold.
    """

    name: str
    duration_s: int
    acc_mean: tuple[float, float, float]
    acc_noise: float
    gyro_noise: tuple[float, float, float]
    motion_amplitude: float = 0.0
    motion_freq_hz: float = 0.0
    acc_drift: float = 0.0

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ProtocolError(f"{self.name}: duration must be > 0")
        if self.acc_noise < 0 or any(g < 0 for g in self.gyro_noise):
            raise ProtocolError(f"{self.name}: noise stddevs must be >= 0")
        if self.motion_amplitude < 0 or self.motion_freq_hz < 0 or self.acc_drift < 0:
            raise ProtocolError(f"{self.name}: amplitude/frequency/drift must be >= 0")


@dataclass(frozen=True)
class SynthProtocol:
    """A reproducible recipe for a labelled synthetic dataset."""

    behaviours: tuple[BehaviourProfile, ...]
    seed: int
    sequence: tuple[str, ...] | None = None  # None: each behaviour once, in order
    source_id: str = "synthetic"

    def __post_init__(self):
        object.__setattr__(self, "behaviours", tuple(self.behaviours))
        if self.sequence is not None:
            object.__setattr__(self, "sequence", tuple(self.sequence))
        if not self.behaviours:
            raise ProtocolError("protocol declares no behaviours")
        names = [b.name for b in self.behaviours]
        if len(set(names)) != len(names):
            raise ProtocolError("duplicate behaviour profile names")
        if self.sequence is not None:
            if not self.sequence:
                raise ProtocolError("behaviour sequence is empty")
            unknown = [n for n in self.sequence if n not in names]
            if unknown:
                raise ProtocolError(f"sequence names unknown behaviours: {unknown}")

    def effective_sequence(self) -> tuple[str, ...]:
        return self.sequence if self.sequence is not None else tuple(b.name for b in self.behaviours)


def synthesize(proto: SynthProtocol) -> Dataset:
    """Generate a dataset from a protocol, bitwise-reproducible per seed.

    Each sequence entry emits that behaviour's full duration in contiguous
    one-second records; label counts therefore match the protocol durations
    exactly. Samples are quantized to the CSV precision so that
    export -> ingest round-trips to an identical dataset.
    """
    profiles = {b.name: b for b in proto.behaviours}
    names = tuple(b.name for b in proto.behaviours)
    label_of = {n: i for i, n in enumerate(names)}
    rng = np.random.default_rng(proto.seed)
    sample_t = np.arange(SAMPLES_PER_BURST) / SAMPLES_PER_BURST
    records = []
    t = 0
    for entry in proto.effective_sequence():
        prof = profiles[entry]
        mean = np.array(prof.acc_mean)
        gyro_sigma = np.array(prof.gyro_noise)
        for _ in range(prof.duration_s):
            drift = rng.normal(0.0, prof.acc_drift, 3) if prof.acc_drift > 0 else np.zeros(3)
            common_acc, common_gyro = rng.lognormal(0.0, _JITTER_COMMON_SIGMA, 2)
            axis_acc = rng.lognormal(0.0, _JITTER_AXIS_SIGMA, 3)
            axis_gyro = rng.lognormal(0.0, _JITTER_AXIS_SIGMA, 3)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            acc_noise = rng.standard_normal((3, SAMPLES_PER_BURST))
            gyro_noise = rng.standard_normal((3, SAMPLES_PER_BURST))
            if prof.motion_amplitude > 0:
                osc = np.sin(2.0 * np.pi * prof.motion_freq_hz * (t + sample_t) + phase)
                amp = prof.motion_amplitude * common_acc
                gait_acc = amp * _GAIT_ACC_WEIGHTS[:, None] * osc
                gait_gyro = amp * _GAIT_GYRO_COUPLING * _GAIT_GYRO_WEIGHTS[:, None] * np.sin(
                    2.0 * np.pi * prof.motion_freq_hz * (t + sample_t) + phase + np.pi / 4
                )
            else:
                gait_acc = 0.0
                gait_gyro = 0.0
            acc_sigma = prof.acc_noise * common_acc * axis_acc
            acc = (mean + drift)[:, None] + gait_acc + acc_sigma[:, None] * acc_noise
            gyro = gait_gyro + (gyro_sigma * common_gyro * axis_gyro)[:, None] * gyro_noise
            records.append(
                SensorRecord(t, np.round(acc, CSV_DECIMALS), np.round(gyro, CSV_DECIMALS), label_of[entry])
            )
            t += 1
    return Dataset(tuple(records), names, source_id=proto.source_id)


# --- presets --------------------------------------------------------------

_BEHAVIOUR_SHAPES = {
    "lying": dict(
        acc_mean=(9.55, 0.65, 1.90), acc_noise=0.05,
        gyro_noise=(0.020, 0.016, 0.024), acc_drift=0.12,
    ),
    "sitting": dict(
        acc_mean=(0.95, 0.40, 9.72), acc_noise=0.09,
        gyro_noise=(0.070, 0.060, 0.040), acc_drift=0.30,
    ),
    "standing": dict(
        acc_mean=(0.70, 0.55, 9.74), acc_noise=0.10,
        gyro_noise=(0.055, 0.050, 0.165), acc_drift=0.30,
    ),
    "walking": dict(
        acc_mean=(0.45, 0.20, 9.78), acc_noise=0.42,
        gyro_noise=(0.310, 0.260, 0.340), acc_drift=0.25,
        motion_amplitude=1.7, motion_freq_hz=1.9,
    ),
    "running": dict(
        acc_mean=(2.10, -0.15, 9.40), acc_noise=0.90,
        gyro_noise=(1.050, 0.400, 0.550), acc_drift=0.30,
        motion_amplitude=4.8, motion_freq_hz=2.7,
    ),
}

_BEHAVIOUR_ORDER = ("lying", "sitting", "standing", "walking", "running")

# Recording-session presets: total seconds and behaviour percentages of three
# reference deployments. Durations are integers via largest-remainder
# apportionment so that counts sum exactly to the total.
_PRESET_DISTRIBUTIONS = {
    "paper-ea60": (2350, (21.97, 11.58, 17.62, 41.51, 7.32)),
    "paper-ebf8": (2320, (21.30, 11.82, 17.90, 41.57, 7.42)),
    "paper-ed3c": (2340, (21.98, 11.93, 12.44, 46.47, 7.18)),
}

PRESET_NAMES = tuple(_PRESET_DISTRIBUTIONS)
DEFAULT_SEED = 42


def apportion(total: int, percentages) -> tuple[int, ...]:
    """Split ``total`` into integer parts proportional to ``percentages``.

    Largest-remainder method; parts always sum to ``total`` exactly.
    """
    raw = [total * p / 100.0 for p in percentages]
    parts = [math.floor(x) for x in raw]
    remainder = total - sum(parts)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - parts[i]), i))
    for i in order[:remainder]:
        parts[i] += 1
    return tuple(parts)


def preset_protocol(name: str, seed: int = DEFAULT_SEED) -> SynthProtocol:
    """Build one of the bundled recording-session protocols."""
    if name not in _PRESET_DISTRIBUTIONS:
        raise ProtocolError(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")
    total, pcts = _PRESET_DISTRIBUTIONS[name]
    durations = apportion(total, pcts)
    profiles = tuple(
        BehaviourProfile(name=b, duration_s=d, **_BEHAVIOUR_SHAPES[b])
        for b, d in zip(_BEHAVIOUR_ORDER, durations)
    )
    return SynthProtocol(profiles, seed=seed, source_id=name)
