"""Command-line pipeline: synth, featurize, train, sweep, codegen, energy.

Every run writes its outputs atomically and drops a plain-text manifest
next to each output recording the resolved parameters, seed, and content
hashes, so any result can be reproduced from its manifest alone.

Exit codes: 0 success, 2 usage, 3 format/parse error, 4 data/config error,
5 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

from . import __version__, cart, codegen, datamodel, energymodel, evaluation, features
from .errors import ConfigError, FormatError, ShapeError, TagwiseError

EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_DATA = 4
EXIT_IO = 5


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_text(path, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_manifests(subcommand: str, params: dict, inputs: list, outputs: list) -> None:
    lines = [f"tool tagwise {__version__}", f"subcommand {subcommand}"]
    for key in sorted(params):
        lines.append(f"parameter {key} {params[key]}")
    for p in inputs:
        lines.append(f"input {p} sha256:{_sha256_file(p)}")
    for p in outputs:
        lines.append(f"output {p} sha256:{_sha256_file(p)}")
    text = "\n".join(lines) + "\n"
    for p in outputs:
        _write_text(f"{p}.manifest.txt", text)


def _protocol_from_json(path, seed_override=None) -> datamodel.SynthProtocol:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            spec = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None
    try:
        profiles = tuple(
            datamodel.BehaviourProfile(
                name=b["name"],
                duration_s=int(b["duration_s"]),
                acc_mean=tuple(b["acc_mean"]),
                acc_noise=float(b["acc_noise"]),
                gyro_noise=tuple(b["gyro_noise"]),
                motion_amplitude=float(b.get("motion_amplitude", 0.0)),
                motion_freq_hz=float(b.get("motion_freq_hz", 0.0)),
                acc_drift=float(b.get("acc_drift", 0.0)),
            )
            for b in spec["behaviours"]
        )
        seed = seed_override if seed_override is not None else int(spec.get("seed", datamodel.DEFAULT_SEED))
        sequence = tuple(spec["sequence"]) if "sequence" in spec else None
        return datamodel.SynthProtocol(
            profiles, seed=seed, sequence=sequence, source_id=spec.get("source_id", os.path.basename(str(path)))
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: protocol field missing or malformed ({exc})") from None


def _cmd_synth(args) -> int:
    if bool(args.preset) == bool(args.protocol):
        raise ConfigError("exactly one of --preset or --protocol is required")
    if args.preset:
        seed = args.seed if args.seed is not None else datamodel.DEFAULT_SEED
        proto = datamodel.preset_protocol(args.preset, seed=seed)
        params = {"preset": args.preset}
        inputs = []
    else:
        proto = _protocol_from_json(args.protocol, seed_override=args.seed)
        params = {"protocol": args.protocol}
        inputs = [args.protocol]
    ds = datamodel.synthesize(proto)
    datamodel.export_csv(ds, args.out)
    params["seed"] = proto.seed
    _write_manifests("synth", params, inputs, [args.out])
    print(f"wrote {len(ds)} records ({len(ds.behaviours)} behaviours) to {args.out}")
    return 0


def _cmd_featurize(args) -> int:
    ds = datamodel.ingest_csv(args.dataset)
    fm = features.featurize(ds)
    _write_text(args.out, features.features_to_csv(fm))
    _write_manifests("featurize", {}, [args.dataset], [args.out])
    print(f"wrote {len(fm)} feature rows to {args.out}")
    return 0


def _load_features(path) -> features.FeatureMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        return features.features_from_csv(fh.read(), source=str(path))


def _train_config(args) -> cart.TrainConfig:
    mask = features.mask_from_string(args.mask) if args.mask else features.FULL_MASK
    return cart.TrainConfig(
        max_depth=args.depth,
        feature_mask=mask,
        min_samples_split=args.min_samples_split,
        min_samples_leaf=args.min_samples_leaf,
        oversample=args.oversample,
        seed=args.seed,
    )


def _metrics_text(metrics: evaluation.Metrics, behaviours, target) -> str:
    rows = [("class", "precision", "recall", "F1")]
    for i, name in enumerate(behaviours):
        rows.append(
            (name, f"{metrics.precision[i]:.4f}", f"{metrics.recall[i]:.4f}", f"{metrics.f1[i]:.4f}")
        )
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = ["  ".join(c.ljust(widths[i]) for i, c in enumerate(r)).rstrip() for r in rows]
    lines.append(f"accuracy    {metrics.accuracy:.4f}")
    lines.append(f"macro F1    {metrics.macro_f1:.4f}")
    lines.append(f"weighted F1 {metrics.weighted_f1:.4f}")
    if target is not None:
        lines.append(f"target F1   {metrics.target_f1:.4f} ({target})")
    return "\n".join(lines)


def _cmd_train(args) -> int:
    fm = _load_features(args.features)
    cfg = _train_config(args)
    model = cart.fit(fm, cfg)
    _write_text(args.out, cart.serialize(model))
    cm, metrics = evaluation.evaluate(model, fm, args.target)
    outputs = [args.out]
    if args.confusion:
        _write_text(args.confusion, cm.to_csv())
        outputs.append(args.confusion)
    params = {
        "depth": args.depth,
        "mask": features.mask_to_string(cfg.feature_mask),
        "oversample": args.oversample,
        "seed": args.seed,
        "target": args.target or "",
    }
    _write_manifests("train", params, [args.features], outputs)
    print(f"model: depth {model.depth()} of max {args.depth}, {model.n_nodes()} nodes -> {args.out}")
    print(f"fingerprint sha256:{cart.fingerprint(model)}")
    print("resubstitution metrics:")
    print(_metrics_text(metrics, model.behaviours, args.target))
    return 0


def _cmd_sweep(args) -> int:
    fm = _load_features(args.features)
    cfg = cart.TrainConfig(
        max_depth=args.depth,
        oversample=args.oversample,
        seed=args.seed,
    )
    eval_mode = {"resub": "resubstitution", "holdout": "holdout"}[args.eval]
    result = evaluation.sweep(
        fm, cfg, args.target, eval_mode=eval_mode, holdout_ratio=args.ratio, workers=args.workers
    )
    _write_text(args.out, evaluation.sweep_to_csv(result))
    params = {
        "depth": args.depth,
        "target": args.target,
        "eval": eval_mode,
        "ratio": args.ratio if eval_mode == "holdout" else "",
        "oversample": args.oversample,
        "seed": args.seed,
    }
    _write_manifests("sweep", params, [args.features], [args.out])
    print(evaluation.rank_report(result, args.top))
    return 0


def _cmd_codegen(args) -> int:
    with open(args.model, "r", encoding="utf-8") as fh:
        model = cart.deserialize(fh.read())
    opts = codegen.EmitOptions(
        symbol=args.symbol,
        values=codegen.ValueKind.from_name(args.values),
        scale_bits=args.scale_bits,
    )
    emitted = codegen.emit_header(model, opts)
    _write_text(args.out, emitted.source)
    vectors_path = args.vectors or _default_vectors_path(args.out)
    text = codegen.emit_eval_vectors(
        model, args.n_vectors, args.seed, value_kind=emitted.value_kind, scale_bits=args.scale_bits
    )
    _write_text(vectors_path, text)
    outputs = [args.out, vectors_path]
    params = {
        "symbol": args.symbol,
        "values": args.values,
        "n_vectors": args.n_vectors,
        "seed": args.seed,
    }
    _write_manifests("codegen", params, [args.model], outputs)
    print(
        f"emitted {emitted.symbol}({len(emitted.feature_order)} features), "
        f"worst case {emitted.worst_case_comparisons} comparisons -> {args.out}"
    )
    print(f"test vectors -> {vectors_path}")
    print(f"fingerprint sha256:{emitted.fingerprint}")
    return 0


def _default_vectors_path(header_path) -> str:
    text = str(header_path)
    stem = text[: -len(".h")] if text.endswith(".h") else text
    return stem + "_vectors.csv"


def _cmd_energy(args) -> int:
    profile = energymodel.WILDFI if args.profile == "wildfi" else energymodel.load_profile(args.profile)
    plan = energymodel.TransmissionPlan(
        strategy=energymodel.Strategy.from_name(args.strategy),
        n_points=args.n,
        full_bytes_per_point=args.full_bytes,
        selected_bytes_per_point=args.selected_bytes,
        detection_fraction=args.p,
        signal_bytes=args.signal_bytes,
    )
    rep = energymodel.report(plan, profile)
    print(energymodel.report_text(rep, profile, base_days=args.base_days, overhead_full=args.overhead))
    if args.out:
        _write_text(args.out, energymodel.report_csv(rep))
        params = {
            "strategy": args.strategy,
            "p": args.p,
            "n": args.n,
            "full_bytes": args.full_bytes,
            "selected_bytes": args.selected_bytes or "",
            "signal_bytes": args.signal_bytes,
            "profile": args.profile,
        }
        _write_manifests("energy", params, [] if args.profile == "wildfi" else [args.profile], [args.out])
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tagwise",
        description="Train tag-side behaviour classifiers and plan transmission energy budgets.",
    )
    parser.add_argument("--version", action="version", version=f"tagwise {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic burst dataset CSV")
    p.add_argument("--preset", choices=datamodel.PRESET_NAMES, help="bundled recording preset")
    p.add_argument("--protocol", help="JSON protocol file")
    p.add_argument("--seed", type=int, default=None,
                   help="overrides the preset/protocol seed (preset default: 42)")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("featurize", help="reduce a burst dataset to the 8-feature matrix")
    p.add_argument("dataset")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=_cmd_featurize)

    p = sub.add_parser("train", help="fit a depth-bounded decision tree")
    p.add_argument("features")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--mask", help="feature subset, e.g. 'GX;GZ;AX'")
    p.add_argument("--target", help="behaviour for target-class metrics")
    p.add_argument("--oversample", action="store_true")
    p.add_argument("--min-samples-split", type=int, default=2)
    p.add_argument("--min-samples-leaf", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--confusion", help="also write the confusion matrix CSV here")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("sweep", help="rank every non-empty feature subset for a target behaviour")
    p.add_argument("features")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--eval", choices=("resub", "holdout"), default="resub")
    p.add_argument("--ratio", type=float, default=0.7, help="holdout train fraction")
    p.add_argument("--top", type=int, default=20, help="rows to print")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--oversample", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("codegen", help="emit a model as a C header plus test vectors")
    p.add_argument("model")
    p.add_argument("--symbol", default="classify")
    p.add_argument("--values", choices=("float", "double", "int16"), default="float")
    p.add_argument("--scale-bits", type=int, default=None, help="int16 fixed-point bits")
    p.add_argument("--vectors", help="test-vector CSV path (default: <out>_vectors.csv)")
    p.add_argument("--n-vectors", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=_cmd_codegen)

    p = sub.add_parser("energy", help="compute a transmission plan's bytes/time/charge/energy")
    p.add_argument("--profile", default="wildfi", help="'wildfi' or a key=value profile file")
    p.add_argument("--strategy", required=True)
    p.add_argument("--p", type=float, default=1.0, help="detection fraction")
    p.add_argument("--n", type=int, required=True, help="number of data points")
    p.add_argument("--full-bytes", type=int, required=True, help="bytes per full data point")
    p.add_argument("--selected-bytes", type=int, default=None)
    p.add_argument("--signal-bytes", type=int, default=2)
    p.add_argument("--base-days", type=float, default=None, help="baseline runtime for projection")
    p.add_argument("--overhead", type=float, default=None, help="full-transmission energy overhead fraction")
    p.add_argument("-o", "--out", default=None, help="also write the report CSV here")
    p.set_defaults(func=_cmd_energy)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except (FormatError, ShapeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except TagwiseError as exc:  # data, label, config, protocol
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
