"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data or format error.  Results go to
standard output (or ``--out``); logs go to standard error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import os
import sys

from . import anova, linear, pipeline, representation
from .data import TEST, TRAIN, load_ucr_dataset
from .errors import HiervarError

log = logging.getLogger("hiervar")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
THREADS_ENV = "HIERVAR_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _float_list(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _str_list(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _config_flags(p, selector_default="erocket"):
    p.add_argument("--repr", default="minirocket", choices=["minirocket", "raster"],
                   help="random representation (TER or rTER pooling)")
    p.add_argument("--selector", default=selector_default, choices=pipeline.SELECTORS)
    p.add_argument("--d", type=float, default=anova.DEFAULT_DIVIDER, help="ANOVA divider")
    p.add_argument("--k", type=int, default=10_000, help="number of features")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--folds", type=int, default=linear.DEFAULT_FOLDS)
    p.add_argument("--lambda-grid", type=_float_list, default=list(linear.LAMBDA_GRID))
    p.add_argument("--lasso-alpha", type=float, default=linear.LASSO_ALPHA)
    p.add_argument("--knee-sensitivity", type=float, default=1.0)
    p.add_argument("--knee-select", choices=["first", "strongest"], default="strongest")
    p.add_argument("--no-class-weighting", action="store_true")
    p.add_argument("--no-normalize", action="store_true", help="skip per-series z-normalization")


def _common(p):
    p.add_argument("--threads", type=int, default=None,
                   help=f"cap on BLAS threads (default: ${THREADS_ENV} or library default)")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser():
    parser = _Parser(prog="hiervar", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("transform", help="featurize a dataset split")
    p.add_argument("--train", required=True, help="training split (fits the kernel bank)")
    p.add_argument("--input", help="split to featurize (default: the training split)")
    p.add_argument("--bank", help="load a saved kernel bank instead of fitting one")
    p.add_argument("--save-bank", help="write the kernel bank to this path")
    p.add_argument("--out", help="output CSV (default: standard output)")
    p.add_argument("--repr", default="minirocket", choices=["minirocket", "raster"])
    p.add_argument("--k", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-normalize", action="store_true")
    _common(p)

    p = sub.add_parser("run", help="one pipeline run on a train/test pair")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--hiervar", action="store_true", help="add the ANOVA filter stage")
    p.add_argument("--out")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    _config_flags(p)
    _common(p)

    p = sub.add_parser("suite", help="datasets x configs x repeats with aggregate tables")
    p.add_argument("--datasets", nargs="+", required=True,
                   help="UCR dataset directories or <dir>/<Name> prefixes")
    p.add_argument("--out", required=True, help="directory for runs.csv, aggregates.csv, suite.json")
    p.add_argument("--repeats", type=int, default=4)
    p.add_argument("--reprs", type=_str_list, default=["minirocket"])
    p.add_argument("--selectors", type=_str_list, default=["lasso", "erocket"])
    p.add_argument("--hiervar-modes", type=_str_list, default=["off", "on"])
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--no-figures", action="store_true")
    _config_flags(p)
    _common(p)

    p = sub.add_parser("fscore-curve", help="descending F-scores with first-stage membership")
    p.add_argument("--train", required=True)
    p.add_argument("--out")
    p.add_argument("--figure", help="also render the curve to this image file")
    _config_flags(p)
    _common(p)

    p = sub.add_parser("d-sweep", help="selected feature count as the divider varies")
    p.add_argument("--train", required=True)
    p.add_argument("--d-values", type=_float_list, default=[0.5, 1.0, 2.0, 4.0, 8.0])
    p.add_argument("--out")
    p.add_argument("--figure", help="also render the sweep to this image file")
    _config_flags(p)
    _common(p)
    return parser


def _config(args, **overrides):
    values = dict(
        representation=args.repr, n_features=args.k, selector=args.selector,
        hiervar=getattr(args, "hiervar", False), d=args.d, lambda_grid=tuple(args.lambda_grid),
        lasso_alpha=args.lasso_alpha, class_weighting=not args.no_class_weighting,
        seed=args.seed, folds=args.folds, knee_sensitivity=args.knee_sensitivity,
        knee_select=args.knee_select,
    )
    values.update(overrides)
    return pipeline.PipelineConfig(**values)


@contextlib.contextmanager
def _output(path):
    if path:
        with open(path, "w", newline="") as fh:
            yield fh
    else:
        yield sys.stdout


def _cmd_transform(args):
    normalize = not args.no_normalize
    train = load_ucr_dataset(args.train, TRAIN, normalize=normalize)
    target = train
    if args.input:
        target = load_ucr_dataset(args.input, TEST, label_map=train.label_map, normalize=normalize)
    if args.bank:
        bank = representation.load_kernel_bank(args.bank)
    else:
        cfg = pipeline.PipelineConfig(representation=args.repr, n_features=args.k,
                                      selector="none", hiervar=False, seed=args.seed)
        bank = pipeline.build_bank(train, cfg)
    if args.save_bank:
        representation.save_kernel_bank(bank, args.save_bank)
    z = representation.transform(target, bank).values
    with _output(args.out) as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["label"] + [f"f{j}" for j in range(z.shape[1])])
        raw = target.raw_labels
        for label, row in zip(target.labels, z):
            out.writerow([raw[label - 1]] + [repr(float(v)) for v in row])


def _cmd_run(args):
    normalize = not args.no_normalize
    train = load_ucr_dataset(args.train, TRAIN, normalize=normalize)
    test = load_ucr_dataset(args.test, TEST, label_map=train.label_map, normalize=normalize,
                            name=train.name)
    if args.hiervar and args.selector == "none":
        raise UsageError("--hiervar needs --selector erocket or lasso")
    report = pipeline.run_pipeline(train, test, _config(args))
    with _output(args.out) as fh:
        if args.format == "json":
            json.dump(report.as_dict(), fh, indent=1)
            fh.write("\n")
        else:
            cfg = _config(args)
            pipeline.write_rows_csv(fh, [pipeline.run_row(train.name, cfg, 0, report)],
                                    pipeline.RUN_COLUMNS)


def _cmd_suite(args):
    configs = []
    for rep in args.reprs:
        for sel in args.selectors:
            for mode in args.hiervar_modes:
                if mode not in ("on", "off"):
                    raise UsageError(f"--hiervar-modes takes on/off, got {mode!r}")
                if sel == "none" and mode == "on":
                    continue
                configs.append(_config(args, representation=rep, selector=sel, hiervar=mode == "on"))

    def progress(name, cfg, r):
        log.info("%s %s repeat %d (seed %d)", name, cfg.label, r, cfg.seed)

    report = pipeline.run_suite(args.datasets, configs, args.repeats,
                                normalize=not args.no_normalize, progress=progress)
    paths = pipeline.write_suite(report, args.out)
    if not args.no_figures and any(r["runs"] for r in report.aggregates):
        from . import plotting

        plotting.plot_suite(report.aggregates, os.path.join(args.out, "suite.png"))
    log.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    if args.format == "csv":
        pipeline.write_rows_csv(sys.stdout, report.aggregates, pipeline.AGGREGATE_COLUMNS)
    else:
        json.dump(report.as_dict(), sys.stdout, indent=1)
        sys.stdout.write("\n")
    if all(r["error"] for r in report.runs):
        return EXIT_DATA
    return EXIT_OK


def _selection(args):
    if args.selector == "none":
        raise UsageError("this command needs --selector erocket or lasso")
    train = load_ucr_dataset(args.train, TRAIN, normalize=not args.no_normalize)
    return train, pipeline.fit_selection(train, _config(args, hiervar=True))


def _cmd_fscore_curve(args):
    train, state = _selection(args)
    with _output(args.out) as fh:
        anova.write_fscore_csv(fh, state.fscores, state.stage1)
    if args.figure:
        from . import plotting

        plotting.plot_fscore_curve(state.fscores.f_scores, state.stage1,
                                   state.fscores.threshold, args.figure, title=train.name)


def _cmd_d_sweep(args):
    if any(d <= 0 for d in args.d_values):
        raise UsageError("--d-values must be positive")
    train, state = _selection(args)
    rows = anova.d_sweep(state.fscores, state.stage1, args.d_values)
    with _output(args.out) as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["d", "threshold", "after_stage1", "selected_features"])
        for d, count in rows:
            out.writerow([d, repr(state.fscores.mean_f / d), len(state.stage1), count])
    if args.figure:
        from . import plotting

        plotting.plot_d_sweep(rows, args.figure, title=train.name)


COMMANDS = {
    "transform": _cmd_transform,
    "run": _cmd_run,
    "suite": _cmd_suite,
    "fscore-curve": _cmd_fscore_curve,
    "d-sweep": _cmd_d_sweep,
}


def _thread_limit(args):
    threads = args.threads
    if threads is None and os.environ.get(THREADS_ENV):
        threads = int(os.environ[THREADS_ENV])
    if threads is None:
        return contextlib.nullcontext()
    if threads < 1:
        raise UsageError("--threads must be positive")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=threads)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE

    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        with _thread_limit(args):
            code = COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"hiervar: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (HiervarError, OSError) as exc:
        print(f"hiervar: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
