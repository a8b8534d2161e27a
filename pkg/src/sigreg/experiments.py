"""Seeded, repeatable experiment runs and their reports.

An experiment repeats generate -> split -> fit -> evaluate ``R`` times (for
every path dimension in the study) and collects one record per repetition.
Records are turned into a JSON report with aggregates and a tidy CSV with the
fixed columns ``repetition, method, d, metric, value``.
"""

from __future__ import annotations

import datetime as _dt
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import __version__
from .baselines import DEFAULT_K_GRID, fit_fourier_model
from .dataio import atomic_output, ingest_csv
from .datagen import SimSpec, generate
from .errors import ConfigError, DataError, SigRegError
from .order_selection import (
    PenaltyConfig,
    cv_select_order,
    default_m_max,
    dimension_jump,
    fit_signature_model,
)
from .paths import time_augment
from .ridge import cv_select_lambda, default_lambda_grid
from .signature import batch_signatures, sig_dim

__all__ = [
    "KINDS",
    "TIDY_COLUMNS",
    "ExperimentConfig",
    "run_experiment",
    "tidy_rows",
    "write_tidy_csv",
    "aggregate",
    "validate_report",
]

logger = logging.getLogger(__name__)

KINDS = ("toy_convergence", "dimension_study_polysinus", "dimension_study_gp", "csv_regression")
TIDY_COLUMNS = ("repetition", "method", "d", "metric", "value")
DEFAULT_DIMS = (1, 2, 3, 5, 7, 9, 11)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    n: int = 500
    d: int = 2
    p: int = 100
    m_star: int = 5
    noise: float = 100.0
    dims: tuple = ()
    k_pen: float = 20.0
    rho: float = 0.4
    m_max: int | None = None
    kpen_auto: bool = False
    order: str | None = None
    repetitions: int = 20
    train_fraction: float = 0.7
    seed: int = 0
    k_folds: int = 5
    lambda_low: float = 1e-6
    lambda_high: float = 1e3
    lambda_per_decade: int = 10
    K_grid: tuple = DEFAULT_K_GRID
    baseline: bool | None = None
    ols_baseline: bool = False
    standardize: bool = False
    max_features: int = 4000
    paths_file: str | None = None
    targets_file: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}, expected one of {KINDS}")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must lie in (0, 1)")
        if self.order not in (None, "penalized", "cv"):
            raise ConfigError(f"order must be 'penalized' or 'cv', got {self.order!r}")
        if self.kind == "csv_regression" and not self.paths_file:
            raise ConfigError("csv_regression needs paths_file and targets_file")
        PenaltyConfig(k_pen=self.k_pen, rho=self.rho, m_max=self.m_max)
        object.__setattr__(self, "dims", tuple(int(x) for x in self.dims))
        object.__setattr__(self, "K_grid", tuple(int(x) for x in self.K_grid))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["dims"] = list(self.dims)
        out["K_grid"] = list(self.K_grid)
        return out

    # resolved settings -------------------------------------------------
    @property
    def order_method(self) -> str:
        if self.order is not None:
            return self.order
        return "penalized" if self.kind in ("toy_convergence", "csv_regression") else "cv"

    @property
    def with_baseline(self) -> bool:
        if self.baseline is not None:
            return self.baseline
        return self.kind != "toy_convergence"

    @property
    def dim_grid(self) -> tuple:
        if self.kind in ("dimension_study_polysinus", "dimension_study_gp"):
            return self.dims or DEFAULT_DIMS
        return (self.d,)

    def lambda_grid(self) -> np.ndarray:
        return default_lambda_grid(self.lambda_low, self.lambda_high, self.lambda_per_decade)

    def m_max_for(self, d: int) -> int:
        """Explicit ``m_max``, else the budget default further capped by ``max_features``."""
        if self.m_max is not None:
            return self.m_max
        m = default_m_max(d)
        while m > 1 and sig_dim(d + 1, m) > self.max_features:
            m -= 1
        return m

    def sim_spec(self, d: int, seed: int) -> SimSpec:
        if self.kind == "toy_convergence":
            return SimSpec(n=self.n, d=d, p=self.p, seed=seed, m_star=self.m_star, noise=self.noise)
        if self.kind == "dimension_study_polysinus":
            return SimSpec(n=self.n, d=d, p=self.p, seed=seed, response="mean_next_step")
        if self.kind == "dimension_study_gp":
            return SimSpec(n=self.n, d=d, p=self.p, seed=seed, model="gaussian_process", response="trend_norm")
        raise ConfigError(f"{self.kind} does not simulate data")


def _job_seed(seed: int, repetition: int, d: int) -> int:
    state = np.random.SeedSequence(int(seed), spawn_key=(int(repetition), int(d))).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def _split(n: int, train_fraction: float, seed: int):
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(round(train_fraction * n))
    n_train = min(max(n_train, 1), n - 1)
    return np.sort(order[:n_train]), np.sort(order[n_train:])


def _fit_signature(cfg: ExperimentConfig, paths, y, d: int, seed: int) -> dict:
    m_max = cfg.m_max_for(d)
    grid = cfg.lambda_grid()
    if cfg.order_method == "cv":
        m_hat, lam, model = cv_select_order(
            paths, y, m_max, lambda_grid=grid, k_folds=cfg.k_folds, seed=seed, standardize=cfg.standardize
        )
        return {"model": model, "m_hat": m_hat, "lambda": lam, "k_pen": None, "m_max": m_max}
    k_pen = cfg.k_pen
    if cfg.kpen_auto:
        aug = [time_augment(p) for p in paths]
        F = batch_signatures(aug, m_max)
        lam = cv_select_lambda(
            F[:, : sig_dim(d + 1, 1)], y, grid, k=cfg.k_folds, seed=seed, standardize=cfg.standardize
        )
        k_pen = dimension_jump(aug, y, m_max, lam, rho=cfg.rho, features=F, standardize=cfg.standardize)
    pcfg = PenaltyConfig(k_pen=k_pen, rho=cfg.rho, m_max=m_max)
    result, model = fit_signature_model(
        paths, y, pcfg, lambda_grid=grid, k_folds=cfg.k_folds, seed=seed, standardize=cfg.standardize
    )
    return {
        "model": model,
        "m_hat": result.m_hat,
        "lambda": result.lam,
        "k_pen": k_pen,
        "m_max": m_max,
        "risks": result.risks.tolist(),
        "penalties": result.penalties.tolist(),
    }


def _run_job(cfg: ExperimentConfig, repetition: int, d: int, data=None) -> dict:
    seed = _job_seed(cfg.seed, repetition, d)
    if data is None:
        paths, y = generate(cfg.sim_spec(d, seed))
    else:
        paths, y = data
    record = {"repetition": repetition, "d": d, "seed": seed, "metrics": {}, "timings": {}}
    if cfg.kind == "toy_convergence":
        train, test = np.arange(len(paths)), None
    else:
        train, test = _split(len(paths), cfg.train_fraction, seed)
    tr_paths = [paths[i] for i in train]
    record["n_train"] = int(train.size)
    record["n_test"] = 0 if test is None else int(test.size)

    t0 = time.perf_counter()
    sig = _fit_signature(cfg, tr_paths, y[train], d, seed)
    model = sig.pop("model")
    metrics = {k: v for k, v in sig.items() if v is not None}
    metrics["train_mse"] = float(np.mean((y[train] - model.predict(tr_paths)) ** 2))
    if test is not None:
        metrics["test_mse"] = float(np.mean((y[test] - model.predict([paths[i] for i in test])) ** 2))
    record["metrics"]["signature"] = metrics
    record["timings"]["signature_s"] = time.perf_counter() - t0

    if cfg.with_baseline and test is not None:
        t0 = time.perf_counter()
        try:
            fm = fit_fourier_model(
                tr_paths, y[train], K_grid=cfg.K_grid, lambda_grid=cfg.lambda_grid(),
                k_folds=cfg.k_folds, seed=seed, ols=cfg.ols_baseline,
            )
            record["metrics"]["fourier"] = {
                "n_basis": fm.n_basis,
                "lambda": fm.lam,
                "test_mse": float(np.mean((y[test] - fm.predict([paths[i] for i in test])) ** 2)),
            }
        except SigRegError as exc:
            record["metrics"]["fourier"] = {"error": str(exc)}
        record["timings"]["fourier_s"] = time.perf_counter() - t0
    return record


# tidy output keeps only deterministic, plottable numbers
_TIDY_METRICS = {
    "signature": ("m_hat", "lambda", "k_pen", "train_mse", "test_mse"),
    "fourier": ("n_basis", "lambda", "test_mse"),
}


def tidy_rows(records) -> list[tuple]:
    rows = []
    for rec in records:
        for method, names in _TIDY_METRICS.items():
            metrics = rec["metrics"].get(method, {})
            for name in names:
                if name in metrics:
                    rows.append((rec["repetition"], method, rec["d"], name, float(metrics[name])))
    return rows


def write_tidy_csv(path, records) -> None:
    import csv

    with atomic_output(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TIDY_COLUMNS)
        for rep, method, d, metric, value in tidy_rows(records):
            w.writerow([rep, method, d, metric, repr(value)])


def aggregate(records) -> dict:
    """Histogram of ``m_hat`` and test-MSE quartiles, per dimension."""
    out: dict = {}
    for d in sorted({rec["d"] for rec in records}):
        recs = [rec for rec in records if rec["d"] == d]
        entry: dict = {}
        m_hats = [rec["metrics"]["signature"]["m_hat"] for rec in recs]
        values, counts = np.unique(m_hats, return_counts=True)
        entry["m_hat_histogram"] = {str(int(v)): int(c) for v, c in zip(values, counts)}
        for method in ("signature", "fourier"):
            mses = [rec["metrics"].get(method, {}).get("test_mse") for rec in recs]
            mses = [m for m in mses if m is not None]
            if mses:
                q1, med, q3 = np.quantile(mses, [0.25, 0.5, 0.75])
                entry[f"{method}_test_mse"] = {
                    "min": float(np.min(mses)), "q1": float(q1), "median": float(med),
                    "q3": float(q3), "max": float(np.max(mses)),
                }
        out[str(d)] = entry
    return out


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> dict:
    """Run every (dimension, repetition) job and build the report dict."""
    data = None
    if cfg.kind == "csv_regression":
        _, paths, y = ingest_csv(cfg.paths_file, cfg.targets_file)
        if y is None:
            raise DataError("csv_regression needs a targets file")
        data = (paths, y)
        dims = (paths[0].d,)
    else:
        dims = cfg.dim_grid
    jobs = [(r, d) for d in dims for r in range(cfg.repetitions)]
    started = time.perf_counter()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda job: _run_job(cfg, job[0], job[1], data), jobs))
    else:
        records = [_run_job(cfg, r, d, data) for r, d in jobs]
    return {
        "provenance": {
            "tool": "sigreg",
            "version": __version__,
            "seed": cfg.seed,
            "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "elapsed_s": time.perf_counter() - started,
        },
        "config": cfg.to_dict(),
        "records": records,
        "aggregates": aggregate(records),
    }


def validate_report(report: dict) -> None:
    """Check the report layout; raises ``DataError`` on any violation."""
    for key in ("provenance", "config", "records", "aggregates"):
        if key not in report:
            raise DataError(f"report is missing {key!r}")
    cfg = ExperimentConfig.from_dict({k: (tuple(v) if isinstance(v, list) else v) for k, v in report["config"].items()})
    records = report["records"]
    n_dims = 1 if cfg.kind == "csv_regression" else len(cfg.dim_grid)
    if len(records) != cfg.repetitions * n_dims:
        raise DataError(f"expected {cfg.repetitions * n_dims} records, got {len(records)}")
    for rec in records:
        for key in ("repetition", "d", "seed", "metrics", "timings"):
            if key not in rec:
                raise DataError(f"record is missing {key!r}")
        if "m_hat" not in rec["metrics"].get("signature", {}):
            raise DataError("record has no signature m_hat")
    if aggregate(records) != report["aggregates"]:
        raise DataError("aggregates do not match the per-repetition records")
