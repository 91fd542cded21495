"""End-to-end runs: featurize, fit, select (E-ROCKET or lasso, optionally
followed by the ANOVA filter), refit on the selected columns and score."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import time
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import anova, knee, linear, representation
from .data import TimeSeriesDataset, load_ucr_pair
from .errors import ConfigurationError, HiervarError, ShapeError

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

MINIROCKET = "minirocket"
RASTER = "raster"
_REPRESENTATIONS = {
    MINIROCKET: representation.TER,
    "minirocket_ter": representation.TER,
    RASTER: representation.RTER,
    "raster_rter": representation.RTER,
}
SELECTORS = ("none", "erocket", "lasso")
TIMING_KEYS = (
    "transform", "pretrain_fit", "selection", "posttrain_fit", "test_transform",
    "baseline_predict", "test_predict", "selected_test_transform",
)


@dataclass(frozen=True)
class PipelineConfig:
    representation: str = MINIROCKET
    n_features: int = 10_000
    selector: str = "erocket"
    hiervar: bool = True
    d: float = anova.DEFAULT_DIVIDER
    lambda_grid: tuple = linear.LAMBDA_GRID
    lasso_alpha: float = linear.LASSO_ALPHA
    lasso_max_iterations: int = linear.LASSO_MAX_ITER
    lasso_tolerance: float = linear.LASSO_TOL
    class_weighting: bool = True
    seed: int = 0
    folds: int = linear.DEFAULT_FOLDS
    knee_sensitivity: float = 1.0
    knee_shape: str = knee.CONVEX
    knee_select: str = knee.STRONGEST
    aggregation: str = knee.L2_NORM

    def __post_init__(self):
        if self.representation not in _REPRESENTATIONS:
            raise ConfigurationError(f"unknown representation {self.representation!r}")
        if self.selector not in SELECTORS:
            raise ConfigurationError(f"selector must be one of {SELECTORS}")
        if self.hiervar and self.selector == "none":
            raise ConfigurationError("the ANOVA stage needs a first-stage selector")
        if not self.d > 0:
            raise ConfigurationError("d must be positive")
        if not self.lambda_grid:
            raise ConfigurationError("lambda grid is empty")
        object.__setattr__(self, "lambda_grid", tuple(float(v) for v in self.lambda_grid))

    @property
    def mode(self) -> str:
        return _REPRESENTATIONS[self.representation]

    @property
    def label(self) -> str:
        name = f"{self.representation}/{self.selector}"
        return name + "+hiervar" if self.hiervar else name

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["lambda_grid"] = list(self.lambda_grid)
        return out


@dataclass
class RunReport:
    dataset_name: str
    config: dict
    baseline_accuracy: float
    selected_accuracy: float
    feature_counts: dict
    reduction_percent: float
    chosen_lambda: dict
    wall_times: dict = field(default_factory=dict)
    knee_index: int | None = None
    mean_f: float | None = None
    threshold: float | None = None
    empty_selection_fallback: bool = False
    lasso_converged: bool | None = None
    selected_features: list = field(default_factory=list)

    def as_dict(self, timings: bool = True) -> dict:
        out = dataclasses.asdict(self)
        if not timings:
            out.pop("wall_times")
        return out


@contextmanager
def _timed(times: dict, key: str):
    start = time.perf_counter()
    yield
    times[key] = times.get(key, 0.0) + time.perf_counter() - start


def evaluate_accuracy(predicted, actual) -> float:
    """Fraction of exact label matches."""
    p = np.asarray(predicted)
    a = np.asarray(actual)
    if p.shape != a.shape:
        raise ShapeError(f"prediction length {p.size} differs from label length {a.size}")
    if p.size == 0:
        raise ShapeError("cannot score an empty prediction")
    return float(np.mean(p == a))


def _fit_cv(z, labels, config, n_classes):
    lam = linear.cross_validate_lambda(
        z, labels, config.lambda_grid, config.folds, config.class_weighting, config.seed,
        n_classes=n_classes,
    )
    return linear.fit_ridge(z, labels, lam, config.class_weighting, n_classes=n_classes)


def build_bank(train: TimeSeriesDataset, config: PipelineConfig) -> representation.KernelBank:
    bank = representation.generate_kernel_bank(
        train.series_length, config.n_features, config.mode, config.seed, train=train,
    )
    if bank.mode == representation.TER:
        bank = representation.fit_biases(bank, train, config.seed)
    return bank


def stage_one(z, labels, model, config: PipelineConfig, n_classes: int):
    """First-stage selection; returns (indices, details dict)."""
    details = {}
    if config.selector == "none":
        return np.arange(z.shape[1]), details
    if config.selector == "lasso":
        lasso = linear.fit_lasso(z, labels, config.lasso_alpha, config.lasso_max_iterations,
                                 config.lasso_tolerance, n_classes=n_classes)
        details["lasso_converged"] = lasso.converged
        if not lasso.converged:
            log.warning("lasso did not converge in %d sweeps", config.lasso_max_iterations)
        return lasso.support(), details
    ranking = knee.rank_coefficients(model, config.aggregation)
    found = knee.kneedle_detect(ranking.magnitudes, config.knee_sensitivity,
                                config.knee_shape, config.knee_select)
    details["knee_index"] = found.knee_index
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", knee.NoKneeWarning)
        selected = knee.select_erocket(ranking, found)
    if not found.found:
        log.warning("no knee found; E-ROCKET keeps all %d features", z.shape[1])
    return selected, details


@dataclass
class SelectionState:
    """Everything the two selection stages computed on one training split."""

    bank: representation.KernelBank
    features: np.ndarray
    model: linear.RidgeModel
    stage1: np.ndarray
    fscores: anova.FScoreVector
    knee_index: int | None = None
    ranking: knee.CoefficientRanking | None = None

    def final_set(self, d: float | None = None) -> np.ndarray:
        scores = self.fscores if d is None else self.fscores.with_divider(d)
        return anova.select_hiervar(scores, self.stage1).final_set


def fit_selection(train: TimeSeriesDataset, config: PipelineConfig | None = None) -> SelectionState:
    """Featurize the training split and run both selection stages on it."""
    config = config or PipelineConfig()
    if config.selector == "none":
        raise ConfigurationError("selection state needs a first-stage selector")
    bank = build_bank(train, config)
    z = representation.transform(train, bank).values
    model = _fit_cv(z, train.labels, config, train.class_count)
    stage1, details = stage_one(z, train.labels, model, config, train.class_count)
    ranking = None
    if config.selector == "erocket":
        ranking = knee.rank_coefficients(model, config.aggregation)
    return SelectionState(
        bank=bank, features=z, model=model, stage1=stage1,
        fscores=anova.f_scores(z, train.labels, config.d),
        knee_index=details.get("knee_index"), ranking=ranking,
    )


def run_pipeline(train: TimeSeriesDataset, test: TimeSeriesDataset,
                 config: PipelineConfig | None = None) -> RunReport:
    config = config or PipelineConfig()
    if train.series_length != test.series_length:
        raise ShapeError("train and test series lengths differ")
    if test.raw_labels and train.raw_labels and test.raw_labels != train.raw_labels:
        raise ShapeError("train and test use different label maps")
    c = train.class_count
    times = {}

    with _timed(times, "transform"):
        bank = build_bank(train, config)
        z_train = representation.transform(train, bank).values
    k = z_train.shape[1]

    with _timed(times, "pretrain_fit"):
        base_model = _fit_cv(z_train, train.labels, config, c)

    with _timed(times, "selection"):
        stage1, details = stage_one(z_train, train.labels, base_model, config, c)
        final = stage1
        mean_f = threshold = None
        if config.hiervar:
            scores = anova.f_scores(z_train, train.labels, config.d)
            final = anova.select_hiervar(scores, stage1).final_set
            mean_f, threshold = scores.mean_f, scores.threshold

    fallback = False
    post_features = final
    if len(final) == 0:
        log.warning("%s: no feature passed both stages; refitting on the stage-1 set", train.name)
        fallback = True
        post_features = stage1

    with _timed(times, "test_transform"):
        z_test = representation.transform(test, bank).values
    with _timed(times, "baseline_predict"):
        baseline_pred = linear.predict(base_model, z_test)
    baseline_acc = evaluate_accuracy(baseline_pred, test.labels)

    if config.selector == "none":
        post_model = base_model
        times["posttrain_fit"] = 0.0
        with _timed(times, "test_predict"):
            pred = linear.predict(post_model, z_test)
    else:
        with _timed(times, "posttrain_fit"):
            post_model = _fit_cv(z_train[:, post_features], train.labels, config, c)
        z_sel = z_test[:, post_features]
        with _timed(times, "test_predict"):
            pred = linear.predict(post_model, z_sel)

    if config.selector == "none":
        times["selected_test_transform"] = times["test_transform"]
    else:
        # deployment cost: featurize only the surviving features
        with _timed(times, "selected_test_transform"):
            representation.transform(test, representation.select_features(bank, post_features))

    return RunReport(
        dataset_name=train.name,
        config=config.as_dict(),
        baseline_accuracy=baseline_acc,
        selected_accuracy=evaluate_accuracy(pred, test.labels),
        feature_counts={"K": int(k), "after_stage1": int(len(stage1)),
                        "after_hiervar": int(len(final))},
        reduction_percent=100.0 * (1.0 - len(final) / k),
        chosen_lambda={"pretrain": base_model.lam, "posttrain": post_model.lam},
        wall_times={key: times.get(key, 0.0) for key in TIMING_KEYS},
        knee_index=details.get("knee_index"),
        mean_f=mean_f,
        threshold=threshold,
        empty_selection_fallback=fallback,
        lasso_converged=details.get("lasso_converged"),
        selected_features=[int(i) for i in final],
    )


# -- suites -------------------------------------------------------------------

RUN_COLUMNS = (
    "schema_version", "dataset", "config", "repeat", "seed", "representation", "selector",
    "hiervar", "d", "K", "after_stage1", "after_hiervar", "reduction_percent",
    "baseline_accuracy", "selected_accuracy", "lambda_pretrain", "lambda_posttrain",
    "empty_selection_fallback", "error",
) + tuple(f"time_{k}" for k in TIMING_KEYS)

AGGREGATE_COLUMNS = (
    "schema_version", "dataset", "config", "runs", "K", "after_stage1", "after_hiervar",
    "reduction_percent", "baseline_accuracy", "selected_accuracy",
) + tuple(f"time_{k}" for k in TIMING_KEYS)

_MEAN_FIELDS = AGGREGATE_COLUMNS[4:]


@dataclass
class SuiteReport:
    runs: list  # row dicts with RUN_COLUMNS keys
    aggregates: list  # per (dataset, config) and overall rows
    reports: list = field(default_factory=list)  # full RunReport dicts

    def as_dict(self, timings: bool = True) -> dict:
        def strip(row):
            return {k: v for k, v in row.items() if not k.startswith("time_")}

        runs = self.runs if timings else [strip(r) for r in self.runs]
        aggregates = self.aggregates if timings else [strip(r) for r in self.aggregates]
        reports = self.reports
        if not timings:
            reports = [{k: v for k, v in r.items() if k != "wall_times"} for r in reports]
        return {"schema_version": SCHEMA_VERSION, "runs": runs, "aggregates": aggregates,
                "reports": reports}


def run_row(name, config, repeat, report=None, error=None):
    row = dict.fromkeys(RUN_COLUMNS)
    row.update(schema_version=SCHEMA_VERSION, dataset=name, config=config.label, repeat=repeat,
               seed=config.seed, representation=config.representation,
               selector=config.selector, hiervar=config.hiervar, d=config.d, error=error)
    if report is not None:
        row.update(
            K=report.feature_counts["K"],
            after_stage1=report.feature_counts["after_stage1"],
            after_hiervar=report.feature_counts["after_hiervar"],
            reduction_percent=report.reduction_percent,
            baseline_accuracy=report.baseline_accuracy,
            selected_accuracy=report.selected_accuracy,
            lambda_pretrain=report.chosen_lambda["pretrain"],
            lambda_posttrain=report.chosen_lambda["posttrain"],
            empty_selection_fallback=report.empty_selection_fallback,
        )
        row.update({f"time_{k}": v for k, v in report.wall_times.items()})
    return row


def _aggregate(rows, dataset, config_label):
    ok = [r for r in rows if r["error"] is None]
    out = dict.fromkeys(AGGREGATE_COLUMNS)
    out.update(schema_version=SCHEMA_VERSION, dataset=dataset, config=config_label, runs=len(ok))
    for key in _MEAN_FIELDS:
        if ok:
            out[key] = float(np.mean([r[key] for r in ok]))
    return out


def _resolve(dataset, normalize):
    if isinstance(dataset, tuple):
        return dataset
    return load_ucr_pair(dataset, normalize=normalize)


def run_suite(datasets, configs, repeats: int = 4, *, normalize: bool = True,
              progress=None) -> SuiteReport:
    """Every dataset x config x repeat, repeat r using seed ``config.seed + r``.

    ``datasets`` holds UCR paths (see :func:`hiervar.data.find_ucr_pair`) or
    ready ``(train, test)`` pairs.  A dataset that fails to load or run is
    recorded with its error and the suite moves on.  Aggregate rows give
    per-dataset means over repeats, then per-config means over datasets
    (equal weight per dataset) under the name ``ALL``.
    """
    datasets, configs = list(datasets), list(configs)
    if not datasets or not configs:
        raise ConfigurationError("need at least one dataset and one config")
    if repeats < 1:
        raise ConfigurationError("repeats must be positive")

    runs, reports, aggregates = [], [], []
    per_config = {cfg.label: [] for cfg in configs}
    for entry in datasets:
        try:
            train, test = _resolve(entry, normalize)
            name = train.name
        except (HiervarError, OSError) as exc:
            name = str(entry)
            log.error("skipping %s: %s", name, exc)
            for cfg in configs:
                runs.append(run_row(name, cfg, None, error=f"{type(exc).__name__}: {exc}"))
            continue
        for cfg in configs:
            rows = []
            for r in range(repeats):
                run_cfg = dataclasses.replace(cfg, seed=cfg.seed + r)
                if progress:
                    progress(name, run_cfg, r)
                try:
                    report = run_pipeline(train, test, run_cfg)
                except HiervarError as exc:
                    log.error("%s %s repeat %d failed: %s", name, cfg.label, r, exc)
                    rows.append(run_row(name, run_cfg, r, error=f"{type(exc).__name__}: {exc}"))
                    continue
                reports.append(report.as_dict())
                rows.append(run_row(name, run_cfg, r, report))
            runs.extend(rows)
            agg = _aggregate(rows, name, cfg.label)
            aggregates.append(agg)
            if agg["runs"]:
                per_config[cfg.label].append(agg)

    for label, rows in per_config.items():
        if not rows:
            continue
        overall = dict.fromkeys(AGGREGATE_COLUMNS)
        overall.update(schema_version=SCHEMA_VERSION, dataset="ALL", config=label,
                       runs=sum(r["runs"] for r in rows))
        for key in _MEAN_FIELDS:
            overall[key] = float(np.mean([r[key] for r in rows]))
        aggregates.append(overall)
    return SuiteReport(runs=runs, aggregates=aggregates, reports=reports)


def write_rows_csv(fh, rows, columns) -> None:
    out = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
    out.writeheader()
    for row in rows:
        out.writerow({k: ("" if row.get(k) is None else _fmt(row.get(k))) for k in columns})


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return value


def write_suite(report: SuiteReport, out_dir) -> dict:
    """Write ``runs.csv``, ``aggregates.csv`` and ``suite.json``; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"runs": out_dir / "runs.csv", "aggregates": out_dir / "aggregates.csv",
             "json": out_dir / "suite.json"}
    with open(paths["runs"], "w", newline="") as fh:
        write_rows_csv(fh, report.runs, RUN_COLUMNS)
    with open(paths["aggregates"], "w", newline="") as fh:
        write_rows_csv(fh, report.aggregates, AGGREGATE_COLUMNS)
    paths["json"].write_text(json.dumps(report.as_dict(), indent=1))
    return paths
