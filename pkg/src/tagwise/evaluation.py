"""Confusion matrices, classification metrics, and the feature-subset sweep.

The sweep trains one tree per non-empty subset of the eight features
(255 models) and ranks them for a chosen target behaviour: descending
target-class F1, ties broken by descending accuracy, then ascending mask
bit-pattern. Rankings are deterministic and independent of worker count.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, replace

import numpy as np

from . import cart
from .errors import DataError, LabelError
from .features import FEATURE_COUNT, FeatureId, FeatureMatrix, mask_to_string

SUBSET_COUNT = (1 << FEATURE_COUNT) - 1  # 2^8 minus the untrainable empty set


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts[actual, predicted] over an evaluated feature matrix."""

    counts: np.ndarray
    behaviours: tuple[str, ...]

    def __post_init__(self):
        arr = np.asarray(self.counts, dtype=np.int64)
        b = len(self.behaviours)
        if arr.shape != (b, b):
            raise DataError(f"confusion matrix must be ({b}, {b}), got {arr.shape}")
        if (arr < 0).any():
            raise DataError("confusion matrix counts must be >= 0")
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)
        object.__setattr__(self, "behaviours", tuple(self.behaviours))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_csv(self) -> str:
        header = "actual\\predicted," + ",".join(self.behaviours)
        rows = [
            name + "," + ",".join(str(int(c)) for c in self.counts[i])
            for i, name in enumerate(self.behaviours)
        ]
        return "\n".join([header] + rows) + "\n"


@dataclass(frozen=True)
class Metrics:
    """Accuracy plus per-class precision/recall/F1 derived from a matrix."""

    accuracy: float
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    f1: tuple[float, ...]
    target_index: int | None
    target_f1: float
    macro_f1: float
    weighted_f1: float


def metrics_from_confusion(cm: ConfusionMatrix, target: str | None = None) -> Metrics:
    """Derive metrics from matrix counts only (zero denominators give 0)."""
    counts = cm.counts.astype(np.float64)
    total = counts.sum()
    if total <= 0:
        raise DataError("confusion matrix is empty")
    diag = np.diag(counts)
    col = counts.sum(axis=0)
    row = counts.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(col > 0, diag / col, 0.0)
        recall = np.where(row > 0, diag / row, 0.0)
        pr = precision + recall
        f1 = np.where(pr > 0, 2.0 * precision * recall / np.where(pr > 0, pr, 1.0), 0.0)
    target_index = None
    target_f1 = 0.0
    if target is not None:
        if target not in cm.behaviours:
            raise LabelError(f"unknown target behaviour {target!r}")
        target_index = cm.behaviours.index(target)
        target_f1 = float(f1[target_index])
    support = row / total
    return Metrics(
        accuracy=float(diag.sum() / total),
        precision=tuple(float(p) for p in precision),
        recall=tuple(float(r) for r in recall),
        f1=tuple(float(v) for v in f1),
        target_index=target_index,
        target_f1=target_f1,
        macro_f1=float(f1.mean()),
        weighted_f1=float((f1 * support).sum()),
    )


def _map_labels(fm: FeatureMatrix, behaviours: tuple[str, ...]) -> np.ndarray:
    if fm.behaviours == behaviours:
        return np.asarray(fm.labels)
    index = {n: i for i, n in enumerate(behaviours)}
    try:
        lut = np.array([index[n] for n in fm.behaviours], dtype=np.int64)
    except KeyError as exc:
        raise LabelError(f"behaviour {exc.args[0]!r} not in the model's behaviour list") from None
    return lut[fm.labels]


def evaluate(
    m: cart.TreeModel, fm: FeatureMatrix, target: str | None = None
) -> tuple[ConfusionMatrix, Metrics]:
    """Tally predict-vs-label over all rows and derive metrics."""
    actual = _map_labels(fm, m.behaviours)
    predicted = cart.predict_batch(m, fm.values)
    b = len(m.behaviours)
    counts = np.zeros((b, b), dtype=np.int64)
    np.add.at(counts, (actual, predicted), 1)
    cm = ConfusionMatrix(counts, m.behaviours)
    return cm, metrics_from_confusion(cm, target)


def split(fm: FeatureMatrix, ratio: float, seed: int) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Stratified deterministic split into (train, test) by label.

    Each class keeps its proportion within one row on both sides; classes
    need at least 2 rows so neither side is empty.
    """
    if not 0.0 < ratio < 1.0:
        raise DataError(f"split ratio must be in (0, 1), got {ratio}")
    labels = np.asarray(fm.labels)
    rng = np.random.default_rng(seed)
    train_idx: list[np.ndarray] = []
    test_idx: list[np.ndarray] = []
    for c in range(len(fm.behaviours)):
        idx = np.flatnonzero(labels == c)
        if len(idx) == 0:
            continue
        if len(idx) < 2:
            raise DataError(f"class {fm.behaviours[c]!r} has fewer than 2 rows")
        perm = rng.permutation(len(idx))
        n_train = int(np.floor(ratio * len(idx) + 0.5))
        n_train = min(max(n_train, 1), len(idx) - 1)
        train_idx.append(idx[perm[:n_train]])
        test_idx.append(idx[perm[n_train:]])

    def take(parts) -> FeatureMatrix:
        sel = np.sort(np.concatenate(parts))
        return FeatureMatrix(
            fm.values[sel].copy(), labels[sel].copy(), fm.timestamps[sel].copy(), fm.behaviours
        )

    return take(train_idx), take(test_idx)


def mask_from_bits(bits: int) -> tuple[FeatureId, ...]:
    return tuple(f for f in FeatureId if bits & (1 << int(f)))


def mask_bits(mask) -> int:
    return sum(1 << int(f) for f in mask)


def _score_subset(train_fm, eval_fm, cfg, target, bits):
    mask = mask_from_bits(bits)
    model = cart.fit(train_fm, replace(cfg, feature_mask=mask))
    _, metrics = evaluate(model, eval_fm, target)
    return bits, metrics


def _sweep_chunk(job):
    train_fm, eval_fm, cfg, target, chunk = job
    return [_score_subset(train_fm, eval_fm, cfg, target, b) for b in chunk]


@dataclass(frozen=True)
class SweepEntry:
    rank: int
    feature_mask: tuple[FeatureId, ...]
    target_f1: float
    accuracy: float
    macro_f1: float

    @property
    def mask_string(self) -> str:
        return mask_to_string(self.feature_mask)


@dataclass(frozen=True)
class SweepResult:
    entries: tuple[SweepEntry, ...]
    target: str
    config: cart.TrainConfig
    eval_mode: str
    holdout_ratio: float | None = None


def sweep(
    fm: FeatureMatrix,
    cfg: cart.TrainConfig,
    target: str,
    eval_mode: str = "resubstitution",
    holdout_ratio: float = 0.7,
    workers: int = 1,
) -> SweepResult:
    """Train and rank one model per non-empty feature subset.

    eval_mode "resubstitution" scores each model on its training rows;
    "holdout" splits once (stratified, seeded from the config) and scores
    every subset on the same held-out part, so entries stay comparable.
    """
    if target not in fm.behaviours:
        raise LabelError(f"unknown target behaviour {target!r}")
    if len(np.unique(np.asarray(fm.labels))) < 2:
        raise DataError("sweep needs at least 2 classes present")
    if eval_mode == "resubstitution":
        train_fm = eval_fm = fm
    elif eval_mode == "holdout":
        train_fm, eval_fm = split(fm, holdout_ratio, cfg.seed)
    else:
        raise DataError(f"unknown eval_mode {eval_mode!r}")

    all_bits = range(1, SUBSET_COUNT + 1)
    scored = None
    if workers > 1:
        # Processes, not threads: training is GIL-bound. Each subset's
        # result depends only on its bit pattern, so chunking cannot
        # change the outcome.
        chunks = [list(all_bits)[i::workers] for i in range(workers)]
        jobs = [(train_fm, eval_fm, cfg, target, chunk) for chunk in chunks if chunk]
        try:
            with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
                scored = {
                    bits: metrics
                    for part in pool.map(_sweep_chunk, jobs)
                    for bits, metrics in part
                }
        except OSError:  # no usable multiprocessing primitives; same result serially
            scored = None
    if scored is None:
        scored = dict(_score_subset(train_fm, eval_fm, cfg, target, b) for b in all_bits)

    ordered = sorted(
        scored.items(), key=lambda kv: (-kv[1].target_f1, -kv[1].accuracy, kv[0])
    )
    entries = tuple(
        SweepEntry(
            rank=i + 1,
            feature_mask=mask_from_bits(bits),
            target_f1=metrics.target_f1,
            accuracy=metrics.accuracy,
            macro_f1=metrics.macro_f1,
        )
        for i, (bits, metrics) in enumerate(ordered)
    )
    return SweepResult(
        entries,
        target=target,
        config=cfg,
        eval_mode=eval_mode,
        holdout_ratio=holdout_ratio if eval_mode == "holdout" else None,
    )


SUBSET_NOTE = (
    f"{SUBSET_COUNT} non-empty subsets of the {FEATURE_COUNT} features "
    f"(2^{FEATURE_COUNT} = {SUBSET_COUNT + 1} configurations would include "
    "the empty set, which cannot train)"
)


def rank_report(sr: SweepResult, top_n: int) -> str:
    """Ranked table text: rank, feature permutation, F1 %, accuracy %."""
    if top_n < 1:
        raise DataError("top_n must be >= 1")
    rows = [("n-th best", "Feature Permutation", "F1 in %", "Accuracy in %")]
    for e in sr.entries[:top_n]:
        rows.append(
            (str(e.rank), e.mask_string, f"{100.0 * e.target_f1:.2f}", f"{100.0 * e.accuracy:.2f}")
        )
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip() for row in rows]
    lines.append("")
    lines.append(
        f"target behaviour: {sr.target}; eval: {sr.eval_mode}; ranked over {SUBSET_NOTE}."
    )
    return "\n".join(lines) + "\n"


def sweep_to_csv(sr: SweepResult) -> str:
    lines = ["rank,mask,target_f1,accuracy"]
    lines.extend(
        f"{e.rank},{e.mask_string},{e.target_f1:.6f},{e.accuracy:.6f}" for e in sr.entries
    )
    return "\n".join(lines) + "\n"
