"""Command-line front end: ``rampcast <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data or validation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    BivariateSeries, ClassScheme, DataError, RampcastError, ScaleParams, minmax_scale,
    read_series, write_series,
)
from .evaluation import (
    SearchSpace, compute_metrics, confusion, format_lag_table, holdout_split, lag_report,
    majority_metrics, random_search, transition_metrics,
)
from .features import FEATURE_NAMES, feature_matrix
from .imbalance import EasyConfig, EnsembleModel, fit_easy_ensemble
from .learners import CRITERIA
from .preprocess import WindowSpec, extract_instances, read_manifest, read_matrix, write_matrix
from .ramping import RampThresholds, SdaConfig, label_series, segment_series
from .seeding import DEFAULT_SEED, derive_seed
from .stream import StreamState, step
from .synth import SynthConfig, generate

PAPER_LAGS = (4, 8, 12)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser, jobs: bool = False) -> None:
    p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                   help=f"master seed; all sub-seeds derive from it (default {DEFAULT_SEED})")
    p.add_argument("--config", type=Path, default=None,
                   help="JSON config file; flags given on the command line override it")
    if jobs:
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel workers for member training and tuning (results do not depend on it)")


def _physical(p: argparse.ArgumentParser) -> None:
    p.add_argument("--capacity", type=float, default=669.0, help="installed capacity in MW (default 669)")
    p.add_argument("--omega", type=float, default=0.2,
                   help="ramp magnitude as a fraction of capacity (default 0.2)")
    p.add_argument("--epsilon", type=float, default=None,
                   help="swinging-door tolerance in MW (default 1%% of capacity)")
    p.add_argument("--period", type=float, default=15.0, help="sampling period in minutes (default 15)")


def _model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n-subsets", type=int, default=None,
                   help="L, number of balanced majority undersamples (default: tuned value for the scheme)")
    p.add_argument("--n-estimators", type=int, default=None, help="S, boosting rounds per subset (default 10)")
    p.add_argument("--max-depth", type=int, default=None, help="tree depth limit (levels)")
    p.add_argument("--criterion", choices=sorted(CRITERIA), default=None, help="split impurity")
    p.add_argument("--min-samples-split", type=float, default=None,
                   help="minimum node size to split, fraction of training rows in (0, 1]")
    p.add_argument("--min-samples-leaf", type=float, default=None,
                   help="minimum leaf size, fraction of training rows in (0, 1)")
    p.add_argument("--learning-rate", type=float, default=None, help="SAMME shrinkage (dimensionless)")


def _split_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--test-frac", type=float, default=0.2, help="hold-out fraction of rows (default 0.2)")
    p.add_argument("--chronological", action="store_true",
                   help="hold out the latest rows instead of a stratified random sample")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rampcast", description="Wind power ramp event forecasting.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a labeled synthetic wind-farm series")
    _common(p)
    p.add_argument("--out", type=Path, required=True, help="output series CSV")
    p.add_argument("--capacity", type=float, default=669.0, help="installed capacity in MW (default 669)")
    p.add_argument("--n-samples", type=int, default=28_800, help="number of samples (default 28800)")
    p.add_argument("--period", type=float, default=15.0, help="sampling period in minutes (default 15)")
    p.add_argument("--drift", type=float, nargs=5, default=None, metavar="MW_PER_MIN",
                   help="drift per regime (calm up down up-critical down-critical) in MW/min")
    p.add_argument("--noise", type=float, nargs=5, default=None, metavar="MW",
                   help="Gaussian noise std per regime in MW per sample")
    p.add_argument("--transitions", type=float, nargs=25, default=None, metavar="P",
                   help="row-major 5x5 regime transition matrix (rows sum to 1)")
    p.add_argument("--calm-level", type=float, default=0.45,
                   help="calm-regime mean level, fraction of capacity (default 0.45)")
    p.add_argument("--calm-reversion", type=float, default=0.01,
                   help="calm-regime pull towards its level per sample (default 0.01)")
    p.add_argument("--omega", type=float, default=0.2, help="ramp magnitude fraction used for labels")
    p.add_argument("--sda-fraction", type=float, default=0.01,
                   help="swinging-door tolerance as a fraction of capacity (default 0.01)")
    p.add_argument("--unlabeled", action="store_true", help="write every label as unknown")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("label", help="label a power series with swinging-door ramp classes")
    _common(p)
    _physical(p)
    p.add_argument("--in", dest="input", type=Path, required=True, help="input series CSV")
    p.add_argument("--out", type=Path, required=True, help="labeled series CSV")
    p.add_argument("--segments", type=Path, default=None, help="optional CSV of detected trend segments")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("prepare", help="build the masked instance matrix from a labeled series")
    _common(p)
    p.add_argument("--in", dest="input", type=Path, required=True, help="labeled series CSV")
    p.add_argument("--out", type=Path, required=True, help="instance matrix CSV (manifest written beside it)")
    p.add_argument("--l", type=int, default=4, help="window length in samples (default 4)")
    p.add_argument("--h", type=int, default=1, help="forecast horizon in samples (default 1)")
    p.add_argument("--scheme", default="three", help="class scheme: three or five (default three)")
    p.add_argument("--minmax", action="store_true", help="MinMax-scale power before windowing")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("features", help="compute window features from a power series")
    _common(p)
    p.add_argument("--in", dest="input", type=Path, required=True, help="series CSV")
    p.add_argument("--out", type=Path, default=None, help="output CSV (default stdout)")
    p.add_argument("--l", type=int, default=4, help="window length in samples (default 4)")
    p.add_argument("--stride", type=int, default=1, help="gap between window starts in samples (default 1)")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="fit an EasyEnsemble model on an instance matrix")
    _common(p, jobs=True)
    _model_flags(p)
    _split_flags(p)
    p.add_argument("--in", dest="input", type=Path, required=True, help="instance matrix CSV")
    p.add_argument("--model", type=Path, required=True, help="output model JSON")
    p.add_argument("--no-holdout", action="store_true", help="train on every row")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tune", help="random hyperparameter search with stratified k-fold CV")
    _common(p, jobs=True)
    _split_flags(p)
    p.add_argument("--in", dest="input", type=Path, required=True, help="instance matrix CSV")
    p.add_argument("--log", type=Path, required=True, help="trial log CSV")
    p.add_argument("--model", type=Path, default=None, help="also retrain the best candidate and save it")
    p.add_argument("--iterations", type=int, default=75, help="number of sampled candidates (default 75)")
    p.add_argument("--folds", type=int, default=5, help="CV folds k (default 5)")
    p.add_argument("--n-estimators", type=int, default=10, help="S, boosting rounds per subset (default 10)")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("eval", help="score a model on its held-out rows, or run the lag report")
    _common(p, jobs=True)
    p.add_argument("--model", type=Path, default=None, help="model JSON written by train or tune")
    p.add_argument("--in", dest="input", type=Path, default=None, help="instance matrix CSV for --model")
    p.add_argument("--all", action="store_true", help="score every row instead of the held-out rows")
    p.add_argument("--confusion", type=Path, default=None, help="write the row-normalized confusion matrix CSV")
    p.add_argument("--timings", action="store_true", help="include wall-clock times in the report")
    p.add_argument("--series", type=Path, default=None, help="labeled series CSV for the lag report")
    p.add_argument("--lags", type=int, nargs="+", default=list(PAPER_LAGS),
                   help="window lengths in samples for the lag report (default 4 8 12)")
    p.add_argument("--scheme", default="three", help="class scheme for the lag report")
    p.add_argument("--iterations", type=int, default=0,
                   help="random-search candidates per lag (default 0: tuned defaults, no search)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stream", help="forecast online from a stream of power readings")
    _common(p)
    _physical(p)
    p.add_argument("--model", type=Path, required=True, help="model JSON")
    p.add_argument("--in", dest="input", type=Path, default=None,
                   help="series CSV (default: one MW value per line on stdin)")
    p.add_argument("--out", type=Path, default=None, help="output file (default stdout)")
    p.set_defaults(func=cmd_stream)
    return parser


def _apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace, argv: Sequence[str]
                  ) -> argparse.Namespace:
    """Re-parse with config-file values as defaults so explicit flags win.

    Top-level keys apply to every subcommand that has them; a section named
    after the subcommand applies to that subcommand only.
    """
    try:
        doc = json.loads(args.config.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise DataError("config file must hold a JSON object")
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    commands = set(sub.choices)
    own = sub.choices[args.command]
    dests = {a.dest for a in own._actions}
    every = {a.dest for p in sub.choices.values() for a in p._actions}
    values = {}
    for key, value in doc.items():
        key = key.replace("-", "_")
        if key in commands:
            continue
        if key not in every:
            raise DataError(f"unknown config key {key!r}")
        if key in dests:
            values[key] = value
    section = doc.get(args.command, {})
    if not isinstance(section, dict):
        raise DataError(f"config section {args.command!r} must be an object")
    for key, value in section.items():
        key = key.replace("-", "_")
        if key not in dests:
            raise DataError(f"unknown {args.command} config key {key!r}")
        values[key] = value
    values.pop("config", None)
    for key in ("input", "out", "model", "log", "series", "segments", "confusion"):
        if values.get(key) is not None:
            values[key] = Path(values[key])
    own.set_defaults(**values)
    return parser.parse_args(argv)


def _sda(args, capacity: float) -> SdaConfig:
    return SdaConfig(args.epsilon) if args.epsilon is not None else SdaConfig.for_capacity(capacity)


def cmd_synth(args) -> int:
    kw = dict(capacity_mw=args.capacity, n_samples=args.n_samples, period_minutes=args.period,
              calm_level=args.calm_level, calm_reversion=args.calm_reversion, omega=args.omega,
              sda_fraction=args.sda_fraction, seed=args.seed)
    if args.drift is not None:
        kw["drift_mw_per_min"] = tuple(args.drift)
    if args.noise is not None:
        kw["noise_mw"] = tuple(args.noise)
    if args.transitions is not None:
        t = args.transitions
        kw["transitions"] = tuple(tuple(t[5 * r:5 * r + 5]) for r in range(5))
    series = generate(SynthConfig(**kw))
    if args.unlabeled:
        series = BivariateSeries.from_power(series.power, period_minutes=series.period_minutes,
                                            capacity_mw=series.capacity_mw)
    write_series(series, args.out)
    print(f"wrote {len(series)} samples to {args.out}")
    return 0


def cmd_label(args) -> int:
    series = read_series(args.input, has_labels=False, period_minutes=args.period,
                         capacity_mw=args.capacity)
    th = RampThresholds.from_capacity(args.capacity, args.omega)
    sda = _sda(args, args.capacity)
    labeled = label_series(series, sda, th)
    write_series(labeled, args.out)
    if args.segments is not None:
        with open(args.segments, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["start", "end", "ramp_ratio_mw_per_min", "class"])
            for seg in segment_series(series, sda, th):
                writer.writerow([seg.start_idx, seg.end_idx, f"{seg.ramp_ratio_mw_per_min:.12g}",
                                 seg.assigned_class.value])
    print(f"labeled {len(labeled)} samples into {args.out}")
    return 0


def _lag_notice(l: int) -> None:
    if l not in PAPER_LAGS:
        print(f"notice: l={l} is outside the usual set {list(PAPER_LAGS)}", file=sys.stderr)


def cmd_prepare(args) -> int:
    spec = WindowSpec(args.l, args.h)
    _lag_notice(args.l)
    scheme = ClassScheme.parse(args.scheme)
    series = read_series(args.input)
    if not series.is_labeled:
        raise DataError("prepare needs a fully labeled series (run `label` first)")
    extra = {}
    if args.minmax:
        series, lo, hi = minmax_scale(series)
        extra["scale"] = [lo, hi]
    matrix = extract_instances(series, spec, scheme)
    if len(matrix) == 0:
        raise DataError("no instances: no window has a finished event before it")
    write_matrix(matrix, args.out, extra)
    counts = {c.value: int(n) for c, n in zip(scheme.classes, matrix.class_counts())}
    print(json.dumps({"rows": len(matrix), "class_counts": counts}, sort_keys=True))
    return 0


def cmd_features(args) -> int:
    if args.l < 2 or args.stride < 1:
        raise DataError("need l >= 2 and stride >= 1")
    series = read_series(args.input, has_labels=False)
    n = len(series)
    if n < args.l:
        raise DataError(f"series of {n} samples is shorter than l={args.l}")
    starts = np.arange(0, n - args.l + 1, args.stride)
    windows = np.stack([series.power[s:s + args.l] for s in starts])
    feats = feature_matrix(windows)
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["start", *FEATURE_NAMES])
        for s, row in zip(starts, feats):
            writer.writerow([series.start_index + int(s), *(f"{v:.12g}" for v in row)])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def _easy_config(args, scheme: ClassScheme) -> EasyConfig:
    base = EasyConfig.tuned_defaults(scheme, args.seed)
    tree_kw = {k: v for k, v in (("max_depth", args.max_depth), ("criterion", args.criterion),
                                 ("min_samples_split", args.min_samples_split),
                                 ("min_samples_leaf", args.min_samples_leaf)) if v is not None}
    kw = {k: v for k, v in (("n_subsets", args.n_subsets), ("n_estimators", args.n_estimators),
                            ("learning_rate", args.learning_rate)) if v is not None}
    return replace(base, tree=replace(base.tree, **tree_kw), **kw)


def _labeling(input_path: Path, manifest: dict, test_origins: np.ndarray | None, seed: int) -> dict:
    doc = {"matrix": input_path.name, "seed": seed}
    if "scale" in manifest:
        doc["scale"] = manifest["scale"]
    if test_origins is not None:
        doc["test_origins"] = [int(o) for o in test_origins]
    return doc


def _split(args, matrix):
    return holdout_split(matrix, 1.0 - args.test_frac, derive_seed(args.seed, "holdout"),
                         args.chronological)


def cmd_train(args) -> int:
    matrix = read_matrix(args.input)
    manifest = read_manifest(args.input)
    cfg = _easy_config(args, matrix.scheme)
    cfg = replace(cfg, seed=derive_seed(args.seed, "model"))
    if args.no_holdout:
        train, test_origins = matrix, None
    else:
        train, test = _split(args, matrix)
        test_origins = test.origins
    model = fit_easy_ensemble(train, cfg, args.jobs, _labeling(args.input, manifest, test_origins, args.seed))
    model.save(args.model)
    print(json.dumps({"trained_rows": len(train), "weak_learners": len(model.trees),
                      "model": str(args.model)}, sort_keys=True))
    return 0


def cmd_tune(args) -> int:
    matrix = read_matrix(args.input)
    manifest = read_manifest(args.input)
    train, test = _split(args, matrix)
    space = SearchSpace(iterations=args.iterations)
    template = replace(EasyConfig.tuned_defaults(matrix.scheme), n_estimators=args.n_estimators)
    result = random_search(train, space, template, derive_seed(args.seed, "search"), args.folds, args.jobs)
    result.write_log(args.log)
    if args.model is not None:
        cfg = replace(result.best, seed=derive_seed(args.seed, "model"))
        model = fit_easy_ensemble(train, cfg, args.jobs,
                                  _labeling(args.input, manifest, test.origins, args.seed))
        model.save(args.model)
    print(json.dumps({"best_cv_weighted_f1": result.best_score, "best": result.best.to_dict()},
                     sort_keys=True, indent=2))
    return 0


def _report_dict(report, timings: bool) -> dict:
    d = report.to_dict()
    if not timings:
        d.pop("train_seconds")
        d.pop("predict_seconds")
    return d


def cmd_eval(args) -> int:
    if args.series is not None:
        return _eval_lags(args)
    if args.model is None or args.input is None:
        raise UsageError("eval needs --model and --in, or --series for the lag report")
    model = EnsembleModel.load(args.model)
    matrix = read_matrix(args.input)
    if matrix.l != model.l or matrix.scheme is not model.scheme or matrix.h != model.h:
        raise DataError("instance matrix layout does not match the model")
    origins = model.labeling.get("test_origins")
    if args.all or origins is None:
        test_mask = np.ones(len(matrix), dtype=bool)
    else:
        test_mask = np.isin(matrix.origins, np.asarray(origins, dtype=np.int64))
        if not test_mask.any():
            raise DataError("none of the model's held-out rows are in this matrix")
    test = matrix.subset(np.flatnonzero(test_mask))
    train = matrix.subset(np.flatnonzero(~test_mask)) if not test_mask.all() else matrix
    pred = model.predict(test.X)
    report = compute_metrics(test.y, pred, matrix.scheme)
    doc = {
        "rows": len(test),
        "model": _report_dict(report, False),
        "transition_baseline": _report_dict(
            transition_metrics(train, test, derive_seed(args.seed, "baseline")), False),
        "majority_baseline": _report_dict(majority_metrics(train, test), False),
    }
    if args.timings:
        t0 = time.perf_counter()
        model.predict(test.X)
        doc["predict_seconds"] = time.perf_counter() - t0
    print(json.dumps(doc, sort_keys=True, indent=2))
    if args.confusion is not None:
        confusion(test.y, pred, matrix.scheme).to_csv(args.confusion)
    return 0


def _eval_lags(args) -> int:
    for l in args.lags:
        WindowSpec(l)
        _lag_notice(l)
    scheme = ClassScheme.parse(args.scheme)
    series = read_series(args.series)
    if not series.is_labeled:
        raise DataError("the lag report needs a fully labeled series")
    space = SearchSpace(iterations=args.iterations) if args.iterations > 0 else None
    results = lag_report(series, scheme, args.lags, args.seed, space=space, jobs=args.jobs)
    print(format_lag_table(results))
    return 0


def _read_stream_values(fh):
    for lineno, line in enumerate(fh, start=1):
        text = line.strip()
        if not text:
            continue
        try:
            yield float(text)
        except ValueError:
            raise DataError(f"stdin line {lineno}: not a number: {text!r}") from None


def cmd_stream(args) -> int:
    model = EnsembleModel.load(args.model)
    th = RampThresholds.from_capacity(args.capacity, args.omega)
    scale = model.labeling.get("scale")
    state = StreamState(model, th, _sda(args, args.capacity), args.period,
                        ScaleParams(*scale) if scale else None)
    if args.input is not None:
        values = iter(read_series(args.input, has_labels=False, period_minutes=args.period).power)
    else:
        values = _read_stream_values(sys.stdin)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for p in values:
            out.write(step(state, p).format(model.scheme) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return 1
        if args.config is not None:
            args = _apply_config(parser, args, argv)
        if getattr(args, "jobs", 1) < 1:
            raise DataError("--jobs must be >= 1")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (RampcastError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
