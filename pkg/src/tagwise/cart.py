"""Deterministic depth-bounded CART decision-tree learner and predictor.

Greedy impurity minimization over midpoint thresholds, with the exact
tie-break order (lower impurity, then lower feature index, then lower
threshold) pinned so that repeated runs, and runs on permuted-but-equal
data, produce bit-identical trees. Rows with value <= threshold go to the
left child. Depth is the only capacity control; there is no pruning.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ConfigError, DataError, FormatError
from .features import FEATURE_COUNT, FULL_MASK, FeatureId, FeatureMatrix


@dataclass(frozen=True)
class Leaf:
    class_index: int
    class_counts: tuple[int, ...]


@dataclass(frozen=True)
class Internal:
    feature: FeatureId
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Internal]


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters; defaults mirror plain CART."""

    max_depth: int
    feature_mask: tuple[FeatureId, ...] = FULL_MASK
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    oversample: bool = False
    seed: int = 0
    criterion: str = "gini"  # or "entropy"; gini is the canonical choice

    def __post_init__(self):
        if self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1")
        if self.min_samples_split < 2:
            raise ConfigError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ConfigError("min_samples_leaf must be >= 1")
        mask = tuple(self.feature_mask)
        if not mask:
            raise ConfigError("feature mask must not be empty")
        if len(set(mask)) != len(mask):
            raise ConfigError("feature mask contains duplicates")
        object.__setattr__(self, "feature_mask", tuple(sorted(mask)))
        if self.criterion not in ("gini", "entropy"):
            raise ConfigError(f"unknown criterion {self.criterion!r}")


@dataclass(frozen=True)
class TreeModel:
    root: TreeNode
    max_depth: int
    feature_mask: tuple[FeatureId, ...]
    behaviours: tuple[str, ...]
    seed: int = 0
    n_rows: int = 0

    def __post_init__(self):
        object.__setattr__(self, "feature_mask", tuple(sorted(self.feature_mask)))
        object.__setattr__(self, "behaviours", tuple(self.behaviours))
        if not self.feature_mask:
            raise ConfigError("model feature mask must not be empty")
        for name in self.behaviours:
            if not name or any(c in name for c in ",\n\r"):
                raise ConfigError(f"behaviour name {name!r} not serializable")
        allowed = set(self.feature_mask)

        def walk(node, depth):
            if depth > self.max_depth:
                raise ConfigError(f"tree depth exceeds declared max_depth {self.max_depth}")
            if isinstance(node, Internal):
                if node.feature not in allowed:
                    raise ConfigError(f"internal node uses unmasked feature {node.feature.name}")
                walk(node.left, depth + 1)
                walk(node.right, depth + 1)

        walk(self.root, 0)

    def depth(self) -> int:
        """Longest root-to-leaf path, in comparisons (a lone leaf is 0)."""

        def walk(node):
            if isinstance(node, Leaf):
                return 0
            return 1 + max(walk(node.left), walk(node.right))

        return walk(self.root)

    def n_nodes(self) -> int:
        def walk(node):
            if isinstance(node, Leaf):
                return 1
            return 1 + walk(node.left) + walk(node.right)

        return walk(self.root)

    def thresholds_by_feature(self) -> dict[FeatureId, list[float]]:
        out: dict[FeatureId, list[float]] = {}

        def walk(node):
            if isinstance(node, Internal):
                out.setdefault(node.feature, []).append(node.threshold)
                walk(node.left)
                walk(node.right)

        walk(self.root)
        return out


def gini(counts) -> float:
    """Gini impurity 1 - sum((n_i/N)^2) of a per-class count vector."""
    arr = np.asarray(counts, dtype=np.float64)
    if (arr < 0).any():
        raise DataError("class counts must be >= 0")
    total = arr.sum()
    if total <= 0:
        raise DataError("class counts sum to zero")
    p = arr / total
    return float(1.0 - (p * p).sum())


def entropy(counts) -> float:
    """Shannon entropy in bits of a per-class count vector."""
    arr = np.asarray(counts, dtype=np.float64)
    if (arr < 0).any():
        raise DataError("class counts must be >= 0")
    total = arr.sum()
    if total <= 0:
        raise DataError("class counts sum to zero")
    p = arr[arr > 0] / total
    return float(-(p * np.log2(p)).sum())


def _oversample_indices(y: np.ndarray, n_classes: int) -> np.ndarray:
    """Duplicate minority-class rows cyclically until all counts are equal."""
    counts = np.bincount(y, minlength=n_classes)
    target = counts.max()
    extra = []
    for c in range(n_classes):
        idx = np.flatnonzero(y == c)
        if len(idx) == 0:
            continue
        need = target - len(idx)
        if need > 0:
            extra.append(idx[np.arange(need) % len(idx)])
    if not extra:
        return np.arange(len(y))
    return np.concatenate([np.arange(len(y))] + extra)


def _best_split(X, y, indices, mask_cols, n_classes, min_leaf, impurity_of):
    """Scan candidate splits; return (score, feature_col, threshold) or None.

    Candidates are midpoints between consecutive distinct sorted values.
    Iteration order (features ascending, thresholds ascending) plus
    strict-improvement replacement implements the documented tie-break.
    """
    n = len(indices)
    ysub = y[indices]
    best = None
    for col in mask_cols:
        v = X[indices, col]
        order = np.argsort(v, kind="stable")
        sv = v[order]
        sy = ysub[order]
        cut = np.flatnonzero(sv[:-1] < sv[1:])  # split after position i
        if len(cut) == 0:
            continue
        onehot = np.zeros((n, n_classes), dtype=np.float64)
        onehot[np.arange(n), sy] = 1.0
        cum = np.cumsum(onehot, axis=0)
        left = cum[cut]
        total = cum[-1]
        right = total - left
        n_left = cut + 1.0
        n_right = n - n_left
        valid = (n_left >= min_leaf) & (n_right >= min_leaf)
        if not valid.any():
            continue
        if impurity_of is gini:
            score = 1.0 - (
                (left * left).sum(axis=1) / n_left + (right * right).sum(axis=1) / n_right
            ) / n
        else:
            score = np.array(
                [
                    (n_left[i] * entropy(left[i]) + n_right[i] * entropy(right[i])) / n
                    for i in range(len(cut))
                ]
            )
        score = np.where(valid, score, np.inf)
        i = int(np.argmin(score))  # first minimum: lowest threshold wins ties
        if best is None or score[i] < best[0]:
            thr = (sv[cut[i]] + sv[cut[i] + 1]) / 2.0
            best = (float(score[i]), col, thr)
    return best


def fit(fm: FeatureMatrix, cfg: TrainConfig) -> TreeModel:
    """Train a depth-bounded tree; a pure function of (fm, cfg).

    Splits greedily on the masked feature/threshold pair with the lowest
    weighted impurity; zero-gain splits are taken when a node is impure and
    a valid candidate exists, so sufficient depth always separates any rows
    with distinct feature values. With oversample, minority-class rows are
    repeated cyclically until all class counts equal the majority count.
    """
    if len(fm) == 0:
        raise DataError("feature matrix is empty")
    mask = cfg.feature_mask
    mask_cols = [int(f) for f in mask]
    X = fm.values
    y = np.asarray(fm.labels, dtype=np.int64)
    n_classes = len(fm.behaviours)
    impurity_of = gini if cfg.criterion == "gini" else entropy
    indices = np.arange(len(fm))
    if cfg.oversample:
        indices = _oversample_indices(y, n_classes)

    def grow(idx: np.ndarray, depth: int) -> TreeNode:
        counts = np.bincount(y[idx], minlength=n_classes)
        majority = int(np.argmax(counts))  # argmax takes the lowest index on ties
        leaf = Leaf(majority, tuple(int(c) for c in counts))
        if (
            np.count_nonzero(counts) <= 1
            or depth >= cfg.max_depth
            or len(idx) < cfg.min_samples_split
        ):
            return leaf
        found = _best_split(X, y, idx, mask_cols, n_classes, cfg.min_samples_leaf, impurity_of)
        if found is None:
            return leaf
        _, col, thr = found
        go_left = X[idx, col] <= thr
        return Internal(
            FeatureId(col),
            float(thr),
            grow(idx[go_left], depth + 1),
            grow(idx[~go_left], depth + 1),
        )

    root = grow(indices, 0)
    return TreeModel(
        root=root,
        max_depth=cfg.max_depth,
        feature_mask=mask,
        behaviours=tuple(fm.behaviours),
        seed=cfg.seed,
        n_rows=len(fm),
    )


def _as_row(values) -> tuple[np.ndarray, frozenset | None]:
    if isinstance(values, dict):
        row = np.zeros(FEATURE_COUNT, dtype=np.float64)
        provided = set()
        for key, v in values.items():
            fid = key if isinstance(key, FeatureId) else FeatureId.from_name(str(key))
            row[fid] = v
            provided.add(fid)
        return row, frozenset(provided)
    row = np.asarray(values, dtype=np.float64)
    if row.shape != (FEATURE_COUNT,):
        raise DataError(f"expected {FEATURE_COUNT} feature values, got shape {row.shape}")
    return row, None


def predict(m: TreeModel, values) -> int:
    """Classify one feature vector (length-8 array or name->value mapping)."""
    row, provided = _as_row(values)
    for f in m.feature_mask:
        if provided is not None and f not in provided:
            raise ValueError(f"masked feature {f.name} missing from input mapping")
        if not np.isfinite(row[f]):
            raise ValueError(f"non-finite value for feature {f.name}")
    node = m.root
    while isinstance(node, Internal):
        node = node.left if row[node.feature] <= node.threshold else node.right
    return node.class_index


def _flatten(m: TreeModel):
    feat, thr, left, right, klass = [], [], [], [], []

    def add(node) -> int:
        i = len(feat)
        feat.append(-1)
        thr.append(0.0)
        left.append(-1)
        right.append(-1)
        klass.append(-1)
        if isinstance(node, Leaf):
            klass[i] = node.class_index
        else:
            feat[i] = int(node.feature)
            thr[i] = node.threshold
            left[i] = add(node.left)
            right[i] = add(node.right)
        return i

    add(m.root)
    return (np.array(feat), np.array(thr), np.array(left), np.array(right), np.array(klass))


def predict_batch(m: TreeModel, X) -> np.ndarray:
    """Vectorized predict over an (n, 8) value matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != FEATURE_COUNT:
        raise DataError(f"expected (n, {FEATURE_COUNT}) matrix, got {X.shape}")
    cols = [int(f) for f in m.feature_mask]
    if not np.isfinite(X[:, cols]).all():
        raise ValueError("non-finite value in a masked feature column")
    feat, thr, left, right, klass = _flatten(m)
    node = np.zeros(len(X), dtype=np.int64)
    while True:
        internal = feat[node] >= 0
        if not internal.any():
            break
        rows = np.flatnonzero(internal)
        cur = node[rows]
        goes_left = X[rows, feat[cur]] <= thr[cur]
        node[rows] = np.where(goes_left, left[cur], right[cur])
    return klass[node]


# --- portable model text ----------------------------------------------------

MODEL_FORMAT_VERSION = 1


def serialize(m: TreeModel) -> str:
    """Render a model as portable plain text (lossless round-trip)."""
    lines = [
        f"version {MODEL_FORMAT_VERSION}",
        "behaviours " + ",".join(m.behaviours),
        "features " + ",".join(f.name for f in m.feature_mask),
        f"max_depth {m.max_depth}",
        f"seed {m.seed}",
        f"rows {m.n_rows}",
        f"nodes {m.n_nodes()}",
    ]

    def walk(node):
        if isinstance(node, Leaf):
            lines.append(f"leaf {node.class_index} " + " ".join(str(c) for c in node.class_counts))
        else:
            lines.append(f"internal {node.feature.name} {node.threshold!r}")
            walk(node.left)
            walk(node.right)

    walk(m.root)
    return "\n".join(lines) + "\n"


def deserialize(text: str) -> TreeModel:
    """Parse portable model text; malformed input raises FormatError."""
    lines = text.splitlines()

    def fail(lineno: int, msg: str):
        raise FormatError(f"model text line {lineno + 1}: {msg}")

    def header(lineno: int, key: str) -> str:
        if lineno >= len(lines):
            fail(lineno, f"missing {key!r} line (truncated)")
        parts = lines[lineno].split(" ", 1)
        if parts[0] != key or len(parts) != 2:
            fail(lineno, f"expected {key!r} field, got {lines[lineno]!r}")
        return parts[1]

    if header(0, "version") != str(MODEL_FORMAT_VERSION):
        fail(0, "unsupported model format version")
    behaviours = tuple(header(1, "behaviours").split(","))
    try:
        mask = tuple(FeatureId.from_name(n) for n in header(2, "features").split(","))
    except ValueError as exc:
        raise FormatError(f"model text line 3: {exc}") from None
    try:
        max_depth = int(header(3, "max_depth"))
        seed = int(header(4, "seed"))
        n_rows = int(header(5, "rows"))
        n_nodes = int(header(6, "nodes"))
    except ValueError:
        raise FormatError("model text: non-integer header field") from None

    pos = 7

    def parse_node(depth: int) -> TreeNode:
        nonlocal pos
        if pos >= len(lines):
            fail(len(lines) - 1, "unexpected end of node list (truncated)")
        lineno = pos
        parts = lines[pos].split()
        pos += 1
        if not parts:
            fail(lineno, "blank line inside node list")
        if parts[0] == "leaf":
            if len(parts) != 2 + len(behaviours):
                fail(lineno, f"leaf needs class + {len(behaviours)} counts")
            try:
                klass = int(parts[1])
                counts = tuple(int(c) for c in parts[2:])
            except ValueError:
                fail(lineno, "non-integer leaf field")
            if not 0 <= klass < len(behaviours):
                fail(lineno, f"leaf class {klass} out of range")
            return Leaf(klass, counts)
        if parts[0] == "internal":
            if len(parts) != 3:
                fail(lineno, "internal needs feature and threshold")
            if depth >= max_depth:
                fail(lineno, f"node exceeds declared max_depth {max_depth}")
            try:
                feature = FeatureId.from_name(parts[1])
            except ValueError as exc:
                fail(lineno, str(exc))
            if feature not in mask:
                fail(lineno, f"feature {feature.name} not in declared mask")
            try:
                thr = float(parts[2])
            except ValueError:
                fail(lineno, f"bad threshold {parts[2]!r}")
            if not np.isfinite(thr):
                fail(lineno, "threshold must be finite")
            left = parse_node(depth + 1)
            right = parse_node(depth + 1)
            return Internal(feature, thr, left, right)
        fail(lineno, f"unknown node kind {parts[0]!r}")

    root = parse_node(0)
    if pos != len(lines):
        raise FormatError(f"model text line {pos + 1}: trailing content after node list")
    try:
        model = TreeModel(root, max_depth, mask, behaviours, seed=seed, n_rows=n_rows)
    except ConfigError as exc:
        raise FormatError(f"model text: {exc}") from None
    if model.n_nodes() != n_nodes:
        raise FormatError(f"model text: node count {model.n_nodes()} != declared {n_nodes}")
    return model


def fingerprint(m: TreeModel) -> str:
    """Content hash of the portable model text."""
    return hashlib.sha256(serialize(m).encode("utf-8")).hexdigest()


def training_accuracy(m: TreeModel, fm: FeatureMatrix) -> float:
    preds = predict_batch(m, fm.values)
    return float((preds == fm.labels).mean())
