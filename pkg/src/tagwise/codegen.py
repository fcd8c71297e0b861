"""Emission of trained trees as dependency-free C headers, plus test vectors.

The emitted header defines one pure function (one scalar argument per
masked feature, in canonical feature order) whose nested conditionals
mirror the tree exactly; value <= threshold takes the left branch. A
companion generator produces test-vector files, and a small interpreter
executes the emitted conditional structure directly from the source text,
giving an equivalence check that is independent of the tree object.

Value types: "float" (default) narrows thresholds to single precision,
"double" keeps full precision, "int16" emits integer comparisons against
a documented power-of-two fixed-point scale. Test vectors are generated
on the chosen type's value grid, so the emitted comparisons and the
reference predictor agree exactly on every vector, boundary cases
included.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import cart
from .errors import ConfigError, FormatError
from .features import FEATURE_COUNT, FeatureId

TOOL_BANNER = "tagwise 0.1.0"
INT16_MAX = 32767


class ValueKind(Enum):
    FLOAT = "float"
    DOUBLE = "double"
    INT16 = "int16"

    @classmethod
    def from_name(cls, name: str) -> "ValueKind":
        for k in cls:
            if k.value == name.strip().lower():
                return k
        raise ConfigError(f"unknown value type {name!r}")


@dataclass(frozen=True)
class EmitOptions:
    symbol: str = "classify"
    values: ValueKind = ValueKind.FLOAT
    scale_bits: int | None = None  # int16 only; None picks the largest fit


@dataclass(frozen=True)
class EmittedClassifier:
    source: str
    symbol: str
    feature_order: tuple[FeatureId, ...]
    worst_case_comparisons: int
    fingerprint: str
    value_kind: ValueKind
    scale: int | None = None


_IDENTIFIER = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _quantize(x: float, scale: int) -> int:
    """Fixed-point quantization, halves toward +infinity."""
    return int(math.floor(x * scale + 0.5))


def _pick_scale_bits(thresholds, requested: int | None) -> int:
    if requested is not None:
        if not 0 <= requested <= 14:
            raise ConfigError("scale_bits must be in [0, 14]")
        bits = requested
        if any(abs(_quantize(t, 1 << bits)) > INT16_MAX for t in thresholds):
            raise ConfigError(f"thresholds overflow int16 at scale 2^{bits}")
        return bits
    for bits in range(14, -1, -1):
        if all(abs(_quantize(t, 1 << bits)) <= INT16_MAX for t in thresholds):
            return bits
    raise ConfigError("thresholds overflow int16 at every scale")


def _float32_literal(t: float) -> str:
    return np.format_float_positional(np.float32(t), unique=True, trim="0") + "f"


def _all_thresholds(m: cart.TreeModel) -> list[float]:
    return [t for ts in m.thresholds_by_feature().values() for t in ts]


def emit_header(m: cart.TreeModel, opts: EmitOptions = EmitOptions()) -> EmittedClassifier:
    """Render a model as a freestanding C header (deterministic text)."""
    if not _IDENTIFIER.match(opts.symbol):
        raise ConfigError(f"symbol {opts.symbol!r} is not a valid C identifier")
    kind = opts.values
    scale = None
    if kind is ValueKind.INT16:
        scale = 1 << _pick_scale_bits(_all_thresholds(m), opts.scale_bits)
    ctype = {"float": "float", "double": "double", "int16": "int"}[kind.value]
    sym = opts.symbol
    upper = sym.upper()
    order = m.feature_mask
    params = [f.display_name.lower() for f in order]
    depth = m.depth()
    digest = cart.fingerprint(m)

    def literal(t: float) -> str:
        if kind is ValueKind.FLOAT:
            return _float32_literal(t)
        if kind is ValueKind.DOUBLE:
            return repr(t)
        return str(_quantize(t, scale))

    lines = [
        "/*",
        f" * {sym} - decision-tree behaviour classifier",
        f" * generated by {TOOL_BANNER}; edits will be overwritten",
        " *",
        " * classes: " + " ".join(f"{i}={n}" for i, n in enumerate(m.behaviours)),
        " * features (argument order): " + ", ".join(f.display_name for f in order),
        f" * value type: {kind.value}",
        f" * tree depth / worst-case comparisons: {depth}",
        f" * model fingerprint: sha256:{digest}",
    ]
    if kind is ValueKind.INT16:
        lines.append(f" * fixed-point scale: {scale}; quantize inputs as floor(x * {scale} + 0.5)")
    lines += [
        " */",
        f"#ifndef TAGWISE_{upper}_H",
        f"#define TAGWISE_{upper}_H",
        "",
        f"#define {upper}_FEATURE_COUNT {len(order)}",
        f"#define {upper}_CLASS_COUNT {len(m.behaviours)}",
        f"#define {upper}_DEPTH {depth}",
        f"#define {upper}_VALUE_{kind.value.upper()} 1",
    ]
    if kind is ValueKind.INT16:
        lines.append(f"#define {upper}_SCALE {scale}")
    lines += [
        "",
        f"static const char *const {sym}_classes[{len(m.behaviours)}] = {{"
        + ", ".join('"' + n + '"' for n in m.behaviours)
        + "};",
        "",
        f"static int {sym}(" + ", ".join(f"{ctype} {p}" for p in params) + ")",
        "{",
    ]

    def walk(node, indent: int):
        pad = "    " * indent
        if isinstance(node, cart.Leaf):
            lines.append(f"{pad}return {node.class_index};")
            return
        name = node.feature.display_name.lower()
        lines.append(f"{pad}if ({name} <= {literal(node.threshold)}) {{")
        walk(node.left, indent + 1)
        lines.append(f"{pad}}} else {{")
        walk(node.right, indent + 1)
        lines.append(f"{pad}}}")

    walk(m.root, 1)
    param_refs = ", ".join(f"(v)[{i}]" for i in range(len(order)))
    lines += [
        "}",
        "",
        f"#define {sym}_row(v) {sym}({param_refs})",
        "",
        f"#endif /* TAGWISE_{upper}_H */",
        "",
    ]
    return EmittedClassifier(
        source="\n".join(lines),
        symbol=sym,
        feature_order=order,
        worst_case_comparisons=depth,
        fingerprint=digest,
        value_kind=kind,
        scale=scale,
    )


# --- interpreter over the emitted source ------------------------------------

_SIG_RE = re.compile(r"static int (\w+)\(([^)]*)\)")
_IF_RE = re.compile(r"^if \((\w+) <= ([^)]+)\) \{$")
_RET_RE = re.compile(r"^return (\d+);$")


def emitted_runner(source: str):
    """Compile an emitted header's conditional structure into a callable.

    Operates on the source text alone (no tree object), narrowing inputs
    and literals to the header's declared value type, exactly as a C
    compilation of the header would. The returned callable maps a length-8
    feature row (or name->value mapping) to a class index.
    """
    sig = _SIG_RE.search(source)
    if not sig:
        raise FormatError("no classifier function found in source")
    sym = sig.group(1)
    params = []
    ctype = None
    for part in sig.group(2).split(","):
        ctype, name = part.strip().rsplit(" ", 1)
        params.append(FeatureId.from_name(name))
    if ctype == "int":
        m = re.search(rf"#define {re.escape(sym.upper())}_SCALE (\d+)", source)
        if not m:
            raise FormatError("int16 header missing scale define")
        scale = int(m.group(1))

        def conv(x):
            return _quantize(float(x), scale)

        def lit(s):
            return int(s)

    elif ctype == "float":

        def conv(x):
            return np.float32(x)

        def lit(s):
            return np.float32(float(s.rstrip("fF")))

    elif ctype == "double":
        conv = float

        def lit(s):
            return float(s)

    else:
        raise FormatError(f"unsupported parameter type {ctype!r}")

    body_start = source.index("{", sig.end()) + 1
    body_end = source.index("\n}", body_start)
    stmts = [ln.strip() for ln in source[body_start:body_end].splitlines() if ln.strip()]

    pos = 0

    def parse_block():
        # returns ("ret", class) | ("if", feature, literal, left, right)
        nonlocal pos
        if pos >= len(stmts):
            raise FormatError("unexpected end of function body")
        line = stmts[pos]
        ret = _RET_RE.match(line)
        if ret:
            pos += 1
            return ("ret", int(ret.group(1)))
        cond = _IF_RE.match(line)
        if not cond:
            raise FormatError(f"unrecognized statement: {line!r}")
        pos += 1
        feature = FeatureId.from_name(cond.group(1))
        threshold = lit(cond.group(2))
        left = parse_block()
        if pos >= len(stmts) or stmts[pos] != "} else {":
            raise FormatError("expected '} else {'")
        pos += 1
        right = parse_block()
        if pos >= len(stmts) or stmts[pos] != "}":
            raise FormatError("expected closing '}'")
        pos += 1
        return ("if", feature, threshold, left, right)

    tree = parse_block()
    if pos != len(stmts):
        raise FormatError("trailing statements after classifier body")

    def run(values) -> int:
        row, _ = cart._as_row(values)
        args = {f: conv(row[f]) for f in params}
        node = tree
        while node[0] == "if":
            node = node[3] if args[node[1]] <= node[2] else node[4]
        return node[1]

    return run


def run_emitted(source: str, values) -> int:
    """One-shot convenience wrapper around emitted_runner."""
    return emitted_runner(source)(values)


# --- test-vector generation --------------------------------------------------


class _Grid:
    """Snap/step arithmetic on the representable values of a value type."""

    def __init__(self, kind: ValueKind, scale: int | None):
        self.kind = kind
        self.scale = scale

    def snap(self, x: float) -> float:
        if self.kind is ValueKind.FLOAT:
            return float(np.float32(x))
        if self.kind is ValueKind.INT16:
            return _quantize(x, self.scale) / self.scale
        return x

    def up(self, x: float) -> float:
        if self.kind is ValueKind.FLOAT:
            return float(np.nextafter(np.float32(x), np.float32(np.inf)))
        if self.kind is ValueKind.INT16:
            return (_quantize(x, self.scale) + 1) / self.scale
        return math.nextafter(x, math.inf)

    def down(self, x: float) -> float:
        if self.kind is ValueKind.FLOAT:
            return float(np.nextafter(np.float32(x), np.float32(-np.inf)))
        if self.kind is ValueKind.INT16:
            return (_quantize(x, self.scale) - 1) / self.scale
        return math.nextafter(x, -math.inf)

    def hazard(self, t: float) -> float | None:
        """The one grid value whose comparison against t diverges after
        narrowing: snap(t) when narrowing rounded the threshold up."""
        s = self.snap(t)
        return s if s > t else None

    def cell(self, v: float) -> str:
        if self.kind is ValueKind.FLOAT and v == float(np.float32(v)):
            return np.format_float_positional(np.float32(v), unique=True, trim="0")
        return repr(float(v))


def _scan(start, step, bad, out_of_bounds, max_steps=64):
    """First grid value from start (stepping) that is neither bad nor out."""
    x = start
    for _ in range(max_steps):
        if out_of_bounds(x):
            return None
        if not bad(x):
            return x
        x = step(x)
    return None


def emit_eval_vectors(
    m: cart.TreeModel,
    n: int,
    seed: int,
    value_kind: ValueKind = ValueKind.FLOAT,
    scale_bits: int | None = None,
) -> str:
    """Generate a test-vector CSV: n random rows plus boundary probes.

    Random values span the model's threshold ranges with margin; every
    internal node contributes probes at its threshold and one step to
    either side (at the chosen value type's resolution), placed on a path
    that actually reaches the node. Expected classes come from the
    reference predictor; values are kept on the value type's grid and off
    its divergent points, so expectations hold for the emitted code too.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    scale = (1 << _pick_scale_bits(_all_thresholds(m), scale_bits)) if value_kind is ValueKind.INT16 else None
    grid = _Grid(value_kind, scale)
    mask = m.feature_mask
    by_feature = m.thresholds_by_feature()

    ranges = {}
    for f in mask:
        ts = by_feature.get(f)
        lo, hi = (min(ts), max(ts)) if ts else (0.0, 0.0)
        span = max(hi - lo, 1.0)
        lo, hi = lo - 0.25 * span, hi + 0.25 * span
        if value_kind is ValueKind.INT16:
            bound = (INT16_MAX - 1) / scale
            lo, hi = max(lo, -bound), min(hi, bound)
        ranges[f] = (lo, hi)

    hazards = {
        f: {h for t in by_feature.get(f, ()) if (h := grid.hazard(t)) is not None} for f in mask
    }

    rng = np.random.default_rng(seed)
    rows: list[dict] = []

    for _ in range(n):
        vals = {}
        for f in mask:
            lo, hi = ranges[f]
            x = grid.snap(rng.uniform(lo, hi))
            while x in hazards[f]:
                x = grid.up(x)
            vals[f] = x
        rows.append(vals)

    def representative(f, lo, hi):
        glo, ghi = ranges[f]
        lo_eff = lo if math.isfinite(lo) else glo
        hi_eff = hi if math.isfinite(hi) else ghi
        raw = (lo_eff + hi_eff) / 2.0 if lo_eff < hi_eff else hi_eff
        x = _scan(
            grid.snap(raw), grid.up,
            bad=lambda v: v in hazards[f] or v <= lo,
            out_of_bounds=lambda v: v > hi,
        )
        if x is not None:
            return x
        return _scan(
            grid.snap(raw), grid.down,
            bad=lambda v: v in hazards[f] or v > hi,
            out_of_bounds=lambda v: v <= lo,
        )

    def probe_rows(node, bounds):
        if isinstance(node, cart.Leaf):
            return
        f, t = node.feature, node.threshold
        lo, hi = bounds.get(f, (-math.inf, math.inf))
        base = {}
        for g in mask:
            if g == f:
                continue
            glo, ghi = bounds.get(g, (-math.inf, math.inf))
            rep = representative(g, glo, ghi)
            if rep is None:
                base = None
                break
            base[g] = rep
        if base is not None:
            candidates = []
            if lo < t <= hi and t not in hazards[f]:
                candidates.append(t)  # exactly at the threshold: goes left
            above = _scan(
                grid.up(grid.snap(t)), grid.up,
                bad=lambda v: v in hazards[f] or v <= lo,
                out_of_bounds=lambda v: v > hi,
            )
            if above is not None:
                candidates.append(above)
            below = _scan(
                grid.down(grid.snap(t)), grid.down,
                bad=lambda v: v in hazards[f] or v > hi,
                out_of_bounds=lambda v: v <= lo,
            )
            if below is not None:
                candidates.append(below)
            for value in candidates:
                rows.append({**base, f: value})
        probe_rows(node.left, {**bounds, f: (lo, min(hi, t))})
        probe_rows(node.right, {**bounds, f: (max(lo, t), hi)})

    probe_rows(m.root, {})

    lines = [",".join([f.display_name for f in mask] + ["expected_class"])]
    for vals in rows:
        full = np.zeros(FEATURE_COUNT)
        for f, v in vals.items():
            full[f] = v
        expected = cart.predict(m, full)
        lines.append(",".join([grid.cell(vals[f]) for f in mask] + [str(expected)]))
    return "\n".join(lines) + "\n"


def parse_vectors(text: str) -> tuple[tuple[FeatureId, ...], list[tuple[dict, int]]]:
    """Parse a test-vector CSV into (feature order, [(values, expected)])."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty vector file")
    header = lines[0].split(",")
    if not header or header[-1] != "expected_class":
        raise FormatError("vector file header must end with expected_class")
    try:
        order = tuple(FeatureId.from_name(c) for c in header[:-1])
    except ValueError as exc:
        raise FormatError(str(exc)) from None
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise FormatError(f"vector file line {lineno}: wrong cell count")
        try:
            values = {f: float(c) for f, c in zip(order, cells)}
            expected = int(cells[-1])
        except ValueError:
            raise FormatError(f"vector file line {lineno}: non-numeric cell") from None
        out.append((values, expected))
    return order, out
