"""Experiment orchestration: scenario/method/size grids, replicates, CSV output.

Each replicate draws a fresh dataset and test set, fits the shared
estimators once, calibrates every requested method on the same split,
and records coverage/size metrics.  Replicate seeds are derived from the
master seed by an order-free stream, so results do not depend on
execution order and replicates can run in a process pool.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .baselines import (
    calibrate_local_reg_split,
    calibrate_probability_split,
    calibrate_quantile_split,
    calibrate_reg_split,
    local_reg_split_band,
    probability_split_labelset,
    quantile_split_band,
    reg_split_band,
)
from .cd_split import (
    calibrate_cd_split,
    calibrate_cd_split_labels,
    cd_split_bands,
    cd_split_labelset,
    default_partition_count,
)
from .core import features_matrix, split_data, targets
from .dist_split import calibrate_dist_split, dist_split_bands
from .estimators import fit_cde, fit_classifier, fit_mad, fit_quantile, fit_regression
from .metrics import MetricReport, avg_size, ccad, marginal_coverage
from .simulation import (
    CLASSIFICATION_KIND,
    SCENARIO_KINDS,
    Scenario,
    TrueConditional,
    sample_scenario,
    stream_seed,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ResultRecord",
    "SummaryRow",
    "run_experiment",
    "write_csv",
    "read_csv",
    "summarize",
    "write_summary_csv",
    "partition_dump",
]

logger = logging.getLogger(__name__)

REGRESSION_METHODS = (
    "dist-split",
    "cd-split",
    "reg-split",
    "local-reg-split",
    "quantile-split",
)
CLASSIFICATION_METHODS = ("cd-split", "probability-split")

CSV_HEADER = (
    "scenario",
    "method",
    "n",
    "replicate",
    "marginal_coverage",
    "ccad",
    "avg_size",
    "wall_ms",
)


class ConfigError(ValueError):
    """Raised for invalid experiment configurations before any work starts."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings for one benchmark run.

    ``j`` overrides the default partition rule (ceil of calibration size
    over 100); ``k``/``bandwidth``/``grid_size`` override the estimator
    defaults.
    """

    scenario: str
    d: int = 1
    n_grid: tuple[int, ...] = (1000,)
    replicates: int = 1
    alpha: float = 0.1
    seed: int = 0
    methods: tuple[str, ...] = ("dist-split",)
    test_size: int = 1000
    split_ratio: float = 0.5
    k: int | None = None
    bandwidth: float | None = None
    grid_size: int = 500
    j: int | None = None
    n_classes: int = 7
    noise_param: str = "variance"

    def __post_init__(self):
        if self.scenario not in SCENARIO_KINDS:
            raise ConfigError(f"unknown scenario: {self.scenario!r}")
        allowed = (
            CLASSIFICATION_METHODS
            if self.scenario == CLASSIFICATION_KIND
            else REGRESSION_METHODS
        )
        if len(self.methods) == 0:
            raise ConfigError("at least one method is required")
        for m in self.methods:
            if m not in allowed:
                raise ConfigError(
                    f"method {m!r} not available for scenario {self.scenario!r}"
                )
        if len(self.n_grid) == 0 or any(n < 2 for n in self.n_grid):
            raise ConfigError("n_grid must hold integers >= 2")
        if list(self.n_grid) != sorted(self.n_grid):
            raise ConfigError("n_grid must be ascending")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must be in (0, 1)")
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigError("split_ratio must be in (0, 1)")
        if self.test_size < 1:
            raise ConfigError("test_size must be >= 1")
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "methods", tuple(self.methods))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        for key in ("n_grid", "methods"):
            if key in data:
                data[key] = tuple(data[key])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data)

    def scenario_obj(self) -> Scenario:
        return Scenario(
            kind=self.scenario,
            d=self.d,
            n_classes=self.n_classes,
            noise_param=self.noise_param,
        )


@dataclass(frozen=True)
class ResultRecord:
    """Metrics of one (scenario, method, n, replicate) cell."""

    scenario: str
    method: str
    n: int
    replicate: int
    marginal_coverage: float
    ccad: float
    avg_size: float
    wall_ms: float


@dataclass(frozen=True)
class SummaryRow:
    """Per-(method, n) aggregate: mean and standard error of each metric."""

    scenario: str
    method: str
    n: int
    replicates: int
    marginal_coverage_mean: float
    marginal_coverage_se: float
    ccad_mean: float
    ccad_se: float
    avg_size_mean: float
    avg_size_se: float


def _replicate_records(config: ExperimentConfig, n: int, replicate: int):
    scenario = config.scenario_obj()
    seed_data = stream_seed(config.seed, n, replicate, 0)
    seed_split = stream_seed(config.seed, n, replicate, 1)
    seed_test = stream_seed(config.seed, n, replicate, 2)
    seed_part = stream_seed(config.seed, n, replicate, 3)

    dataset = sample_scenario(scenario, n, seed_data)
    pair = split_data(dataset, config.split_ratio, seed_split)
    test = sample_scenario(scenario, config.test_size, seed_test)
    X_test = features_matrix(test)
    truths = [TrueConditional(scenario, x) for x in X_test]
    n_elements = (
        config.j
        if config.j is not None
        else default_partition_count(len(pair.calibration))
    )

    prediction_sets = {}
    walls = {}
    if scenario.is_classification:
        classifier = fit_classifier(pair.train, scenario.n_classes)
        for method in config.methods:
            start = time.perf_counter()
            if method == "cd-split":
                calib = calibrate_cd_split_labels(
                    classifier,
                    pair.calibration,
                    n_elements=n_elements,
                    alpha=config.alpha,
                    seed=seed_part,
                )
                prediction_sets[method] = [cd_split_labelset(calib, x) for x in X_test]
            else:  # probability-split
                calib = calibrate_probability_split(
                    classifier, pair.calibration, config.alpha
                )
                prediction_sets[method] = [
                    probability_split_labelset(calib, x) for x in X_test
                ]
            walls[method] = time.perf_counter() - start
    else:
        cde = None
        if {"dist-split", "cd-split"} & set(config.methods):
            cde = fit_cde(
                pair.train,
                k=config.k,
                bandwidth=config.bandwidth,
                grid_size=config.grid_size,
            )
        regression = None
        if {"reg-split", "local-reg-split"} & set(config.methods):
            regression = fit_regression(pair.train, k=config.k)
        for method in config.methods:
            start = time.perf_counter()
            if method == "dist-split":
                calib = calibrate_dist_split(cde, pair.calibration, config.alpha)
                prediction_sets[method] = dist_split_bands(calib, X_test)
            elif method == "cd-split":
                calib = calibrate_cd_split(
                    cde,
                    pair.calibration,
                    n_elements=n_elements,
                    alpha=config.alpha,
                    seed=seed_part,
                )
                prediction_sets[method] = cd_split_bands(calib, X_test)
            elif method == "reg-split":
                calib = calibrate_reg_split(regression, pair.calibration, config.alpha)
                prediction_sets[method] = [reg_split_band(calib, x) for x in X_test]
            elif method == "local-reg-split":
                mad = fit_mad(pair.train, regression, k=config.k)
                calib = calibrate_local_reg_split(
                    regression, mad, pair.calibration, config.alpha
                )
                prediction_sets[method] = [
                    local_reg_split_band(calib, x) for x in X_test
                ]
            else:  # quantile-split
                quantiles = fit_quantile(pair.train, k=config.k)
                calib = calibrate_quantile_split(
                    quantiles, pair.calibration, config.alpha
                )
                prediction_sets[method] = [
                    quantile_split_band(calib, x) for x in X_test
                ]
            walls[method] = time.perf_counter() - start

    records = []
    for method in config.methods:
        sets = prediction_sets[method]
        report = MetricReport(
            marginal_coverage=marginal_coverage(sets, test),
            ccad=ccad(sets, truths, config.alpha),
            avg_size=avg_size(sets),
            n_test=len(test),
        )
        records.append(
            ResultRecord(
                scenario=config.scenario,
                method=method,
                n=n,
                replicate=replicate,
                marginal_coverage=report.marginal_coverage,
                ccad=report.ccad,
                avg_size=report.avg_size,
                wall_ms=walls[method] * 1000.0,
            )
        )
    return records


def _replicate_task(args):
    config, n, replicate = args
    try:
        return _replicate_records(config, n, replicate)
    except Exception:  # noqa: BLE001 - a failed replicate must not kill the run
        logger.exception("replicate %d at n=%d failed; skipping", replicate, n)
        return []


def run_experiment(config: ExperimentConfig, workers: int = 1) -> list[ResultRecord]:
    """Run every (n, replicate) cell and return records in deterministic order.

    ``workers > 1`` distributes replicates over a process pool; results
    are identical to a serial run because every replicate's seeds are
    pre-derived from the master seed.
    """
    tasks = [
        (config, n, rep) for n in config.n_grid for rep in range(config.replicates)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_replicate_task, tasks))
    else:
        chunks = [_replicate_task(t) for t in tasks]
    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=lambda r: (r.scenario, r.method, r.n, r.replicate))
    return records


def _format_float(value: float) -> str:
    return repr(float(value))


def write_csv(records, path: str) -> None:
    """Write result records as UTF-8 CSV with LF line endings."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow(
                [
                    r.scenario,
                    r.method,
                    r.n,
                    r.replicate,
                    _format_float(r.marginal_coverage),
                    _format_float(r.ccad),
                    _format_float(r.avg_size),
                    _format_float(r.wall_ms),
                ]
            )


def read_csv(path: str) -> list[ResultRecord]:
    """Read records back from :func:`write_csv` output (exact round-trip)."""
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            records.append(
                ResultRecord(
                    scenario=row["scenario"],
                    method=row["method"],
                    n=int(row["n"]),
                    replicate=int(row["replicate"]),
                    marginal_coverage=float(row["marginal_coverage"]),
                    ccad=float(row["ccad"]),
                    avg_size=float(row["avg_size"]),
                    wall_ms=float(row["wall_ms"]),
                )
            )
    return records


def _mean_se(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, 0.0
    return mean, float(arr.std(ddof=1) / math.sqrt(arr.size))


def summarize(records) -> list[SummaryRow]:
    """Aggregate records into per-(scenario, method, n) means and standard errors."""
    groups: dict[tuple, list[ResultRecord]] = {}
    for r in records:
        groups.setdefault((r.scenario, r.method, r.n), []).append(r)
    rows = []
    for (scenario, method, n), group in sorted(groups.items()):
        cov_mean, cov_se = _mean_se([g.marginal_coverage for g in group])
        ccad_mean, ccad_se = _mean_se([g.ccad for g in group])
        size_mean, size_se = _mean_se([g.avg_size for g in group])
        rows.append(
            SummaryRow(
                scenario=scenario,
                method=method,
                n=n,
                replicates=len(group),
                marginal_coverage_mean=cov_mean,
                marginal_coverage_se=cov_se,
                ccad_mean=ccad_mean,
                ccad_se=ccad_se,
                avg_size_mean=size_mean,
                avg_size_se=size_se,
            )
        )
    return rows


def write_summary_csv(rows, path: str) -> None:
    header = (
        "scenario",
        "method",
        "n",
        "replicates",
        "marginal_coverage_mean",
        "marginal_coverage_se",
        "ccad_mean",
        "ccad_se",
        "avg_size_mean",
        "avg_size_se",
    )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r in rows:
            writer.writerow(
                [
                    r.scenario,
                    r.method,
                    r.n,
                    r.replicates,
                    _format_float(r.marginal_coverage_mean),
                    _format_float(r.marginal_coverage_se),
                    _format_float(r.ccad_mean),
                    _format_float(r.ccad_se),
                    _format_float(r.avg_size_mean),
                    _format_float(r.avg_size_se),
                ]
            )


def partition_dump(config: ExperimentConfig, path: str) -> None:
    """Write the partition diagnostic: calibration features plus element index.

    Runs the first grid size's replicate 0 pipeline up to the partition
    and writes one row per calibration point.
    """
    scenario = config.scenario_obj()
    n = config.n_grid[0]
    seed_data = stream_seed(config.seed, n, 0, 0)
    seed_split = stream_seed(config.seed, n, 0, 1)
    seed_part = stream_seed(config.seed, n, 0, 3)
    dataset = sample_scenario(scenario, n, seed_data)
    pair = split_data(dataset, config.split_ratio, seed_split)
    n_elements = (
        config.j
        if config.j is not None
        else default_partition_count(len(pair.calibration))
    )
    if scenario.is_classification:
        classifier = fit_classifier(pair.train, scenario.n_classes)
        calib = calibrate_cd_split_labels(
            classifier,
            pair.calibration,
            n_elements=n_elements,
            alpha=config.alpha,
            seed=seed_part,
        )
    else:
        cde = fit_cde(
            pair.train,
            k=config.k,
            bandwidth=config.bandwidth,
            grid_size=config.grid_size,
        )
        calib = calibrate_cd_split(
            cde,
            pair.calibration,
            n_elements=n_elements,
            alpha=config.alpha,
            seed=seed_part,
        )
    X = features_matrix(pair.calibration)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{i}" for i in range(X.shape[1])] + ["element"])
        for row, element in zip(X, calib.assignments):
            writer.writerow([_format_float(v) for v in row] + [int(element)])
