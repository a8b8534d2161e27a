"""Choice of the signature truncation order by penalized empirical risk.

For each order ``m`` a ridge regression is fitted on the signature features
truncated at ``m``; its training mean squared error ``L(m)`` is traded off
against ``pen(m) = k_pen * n**(-rho) * sqrt(s_d(m))``, and the smallest
minimizer of ``L(m) + pen(m)`` is selected. The constant ``k_pen`` can be
calibrated with the dimension-jump heuristic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import CapacityError, ConfigError, DataError
from .paths import SampledPath, time_augment
from .ridge import (
    RidgeModel,
    cv_select_lambda,
    default_lambda_grid,
    empirical_risk,
    kfold_ids,
    predict,
    ridge_fit,
    ridge_path,
)
from .signature import SigShape, batch_signatures, get_budget, sig_dim

__all__ = [
    "PenaltyConfig",
    "OrderSelectionResult",
    "default_m_max",
    "default_kpen_grid",
    "penalty",
    "penalty_curve",
    "risk_curve",
    "select_order",
    "selected_orders",
    "first_big_jump",
    "dimension_jump",
    "SignatureModel",
    "fit_signature_model",
    "cv_select_order",
]

logger = logging.getLogger(__name__)

M_CAP = 10


def default_m_max(d: int, budget: int | None = None) -> int:
    """Largest ``m <= 10`` whose time-augmented signature fits the budget.

    ``d`` is the dimension of the raw (not yet augmented) paths.
    """
    limit = get_budget(budget)
    if sig_dim(d + 1, 1) > limit:
        raise CapacityError(f"even order 1 for d={d} exceeds the budget of {limit}")
    m = 1
    while m < M_CAP and sig_dim(d + 1, m + 1) <= limit:
        m += 1
    return m


def default_kpen_grid(low: float = 1e-3, high: float = 1e4, per_decade: int = 15) -> np.ndarray:
    n = int(round(np.log10(high / low) * per_decade)) + 1
    return np.logspace(np.log10(low), np.log10(high), n)


@dataclass(frozen=True)
class PenaltyConfig:
    k_pen: float = 20.0
    rho: float = 0.4
    m_max: int | None = None

    def __post_init__(self):
        if not (np.isfinite(self.k_pen) and self.k_pen > 0):
            raise ConfigError(f"k_pen must be > 0, got {self.k_pen}")
        if not 0 < self.rho < 0.5:
            raise ConfigError(f"rho must lie in (0, 1/2), got {self.rho}")
        if self.m_max is not None and (int(self.m_max) != self.m_max or self.m_max < 1):
            raise ConfigError(f"m_max must be an integer >= 1, got {self.m_max}")


@dataclass(frozen=True, eq=False)
class OrderSelectionResult:
    m_hat: int
    risks: np.ndarray
    penalties: np.ndarray
    lam: float
    k_pen_used: float

    def __post_init__(self):
        risks = np.array(self.risks, dtype=np.float64)
        penalties = np.array(self.penalties, dtype=np.float64)
        if risks.shape != penalties.shape or risks.ndim != 1 or risks.size == 0:
            raise DataError("risks and penalties must be equal-length non-empty vectors")
        for arr in (risks, penalties):
            arr.flags.writeable = False
        object.__setattr__(self, "risks", risks)
        object.__setattr__(self, "penalties", penalties)

    @property
    def objective(self) -> np.ndarray:
        return self.risks + self.penalties

    def to_dict(self) -> dict:
        return {
            "m_hat": int(self.m_hat),
            "risks": self.risks.tolist(),
            "penalties": self.penalties.tolist(),
            "lambda": self.lam,
            "k_pen": self.k_pen_used,
        }

    def __eq__(self, other):
        if not isinstance(other, OrderSelectionResult):
            return NotImplemented
        return (
            self.m_hat == other.m_hat
            and self.lam == other.lam
            and self.k_pen_used == other.k_pen_used
            and np.array_equal(self.risks, other.risks)
            and np.array_equal(self.penalties, other.penalties)
        )


def penalty(n: int, m: int, d: int, cfg: PenaltyConfig) -> float:
    """``k_pen * n**(-rho) * sqrt(s_d(m))``."""
    if n < 1:
        raise DataError(f"n must be >= 1, got {n}")
    return float(cfg.k_pen * float(n) ** (-cfg.rho) * np.sqrt(sig_dim(d, m)))


def penalty_curve(n: int, d: int, cfg: PenaltyConfig, m_max: int | None = None) -> np.ndarray:
    m_max = cfg.m_max if m_max is None else m_max
    if m_max is None:
        raise ConfigError("m_max is not set")
    return np.array([penalty(n, m, d, cfg) for m in range(m_max + 1)])


def _check_targets(paths, targets):
    y = np.asarray(targets, dtype=np.float64).ravel()
    if len(paths) != y.size:
        raise DataError(f"{len(paths)} paths but {y.size} targets")
    if not np.all(np.isfinite(y)):
        raise DataError("targets contain NaN or Inf")
    return y


def _risks_from_features(F: np.ndarray, y: np.ndarray, d: int, m_max: int, lam: float, **fit_kwargs) -> np.ndarray:
    risks = np.empty(m_max + 1)
    for m in range(m_max + 1):
        q = sig_dim(d, m)
        model = ridge_fit(F[:, :q], y, lam, **fit_kwargs)
        risks[m] = empirical_risk(model, F[:, :q], y)
    return risks


def risk_curve(
    paths: Sequence[SampledPath],
    targets,
    m_max: int,
    lam: float,
    budget: int | None = None,
    features: np.ndarray | None = None,
    **fit_kwargs,
) -> np.ndarray:
    """Training MSE of the ridge fit at every order ``0..m_max``.

    Paths are used as given; augment them beforehand. Signatures are computed
    once at ``m_max`` and truncated, since lower orders are prefixes.
    """
    paths = list(paths)
    y = _check_targets(paths, targets)
    d = paths[0].d
    if features is None:
        features = batch_signatures(paths, m_max, budget=budget)
    return _risks_from_features(features, y, d, m_max, lam, **fit_kwargs)


def select_order(risks, penalties) -> int:
    """Smallest index minimizing ``risks + penalties``."""
    risks = np.asarray(risks, dtype=np.float64).ravel()
    penalties = np.asarray(penalties, dtype=np.float64).ravel()
    if risks.size == 0:
        raise DataError("empty risk curve")
    if risks.size != penalties.size:
        raise DataError(f"{risks.size} risks but {penalties.size} penalties")
    # argmin returns the first occurrence of the minimum
    return int(np.argmin(risks + penalties))


def selected_orders(risks, n: int, d: int, kpen_grid, rho: float = 0.4) -> np.ndarray:
    """``m_hat`` for each ``k_pen`` in the grid, reusing one risk curve."""
    risks = np.asarray(risks, dtype=np.float64)
    base = penalty_curve(n, d, PenaltyConfig(k_pen=1.0, rho=rho), m_max=risks.size - 1)
    return np.array([select_order(risks, k * base) for k in np.asarray(kpen_grid, dtype=np.float64)])


def first_big_jump(m_hats) -> int:
    """Grid index where ``m_hat`` falls the most, earliest on ties."""
    m_hats = np.asarray(m_hats)
    if m_hats.size < 2:
        raise ConfigError("need at least two grid points")
    drops = m_hats[:-1] - m_hats[1:]
    if drops.max() <= 0:
        raise ConfigError("m_hat is constant over the k_pen grid; widen the grid")
    # earliest index of the largest drop; the jump lands on grid[j + 1]
    return int(np.argmax(drops)) + 1


def dimension_jump(
    paths: Sequence[SampledPath],
    targets,
    m_max: int,
    lam: float,
    kpen_grid=None,
    rho: float = 0.4,
    budget: int | None = None,
    features: np.ndarray | None = None,
    return_path: bool = False,
    **fit_kwargs,
):
    """Calibrate ``k_pen`` by the dimension-jump heuristic.

    ``m_hat(k_pen)`` is tracked over an increasing grid; the grid value where
    ``m_hat`` drops by the largest amount (the earliest such value on ties)
    is doubled and returned. Paths are used as given.

    With ``return_path=True`` the ``m_hat`` sequence is returned as well.
    """
    kpen_grid = default_kpen_grid() if kpen_grid is None else np.asarray(kpen_grid, dtype=np.float64).ravel()
    if kpen_grid.size < 2 or np.any(np.diff(kpen_grid) <= 0) or np.any(kpen_grid <= 0):
        raise ConfigError("kpen_grid must be positive, strictly increasing, with at least 2 values")
    paths = list(paths)
    risks = risk_curve(paths, targets, m_max, lam, budget=budget, features=features, **fit_kwargs)
    m_hats = selected_orders(risks, len(paths), paths[0].d, kpen_grid, rho)
    k_pen = 2.0 * float(kpen_grid[first_big_jump(m_hats)])
    logger.debug("dimension jump: m_hat path %s -> k_pen %g", m_hats.tolist(), k_pen)
    return (k_pen, m_hats) if return_path else k_pen


@dataclass(frozen=True, eq=False)
class SignatureModel:
    """Ridge model on the signatures of time-augmented paths."""

    ridge: RidgeModel
    m: int
    augment: bool = True

    def features(self, paths, budget: int | None = None) -> np.ndarray:
        paths = [time_augment(p) for p in paths] if self.augment else list(paths)
        return batch_signatures(paths, self.m, budget=budget)

    def predict(self, paths, budget: int | None = None) -> np.ndarray:
        return predict(self.ridge, self.features(paths, budget))


def fit_signature_model(
    paths: Sequence[SampledPath],
    targets,
    cfg: PenaltyConfig,
    lambda_grid=None,
    k_folds: int = 5,
    seed: int = 0,
    budget: int | None = None,
    standardize: bool = False,
) -> tuple[OrderSelectionResult, SignatureModel]:
    """Select the truncation order and fit the final model on raw paths.

    Steps: time-augment; choose lambda by k-fold CV on order-1 features;
    fit every order ``0..m_max`` with that lambda and record training MSE and
    penalty; take the smallest minimizer ``m_hat``; refit at ``m_hat``.
    """
    paths = [time_augment(p) for p in paths]
    if not paths:
        raise DataError("no paths given")
    y = _check_targets(paths, targets)
    d = paths[0].d
    for i, path in enumerate(paths):
        if path.d != d:
            raise DataError(f"path {i} has dimension {path.d - 1}, expected {d - 1}")
    if cfg.m_max is None:
        cfg = replace(cfg, m_max=default_m_max(d - 1, budget))
    F = batch_signatures(paths, cfg.m_max, budget=budget)
    grid = default_lambda_grid() if lambda_grid is None else lambda_grid
    q1 = sig_dim(d, 1)
    lam = cv_select_lambda(F[:, :q1], y, grid, k=k_folds, seed=seed, standardize=standardize)
    risks = _risks_from_features(F, y, d, cfg.m_max, lam, standardize=standardize)
    penalties = penalty_curve(len(y), d, cfg)
    m_hat = select_order(risks, penalties)
    q = sig_dim(d, m_hat)
    ridge = ridge_fit(F[:, :q], y, lam, standardize=standardize, shape=SigShape(d, m_hat))
    result = OrderSelectionResult(m_hat=m_hat, risks=risks, penalties=penalties, lam=lam, k_pen_used=cfg.k_pen)
    return result, SignatureModel(ridge=ridge, m=m_hat)


def cv_select_order(
    paths: Sequence[SampledPath],
    targets,
    m_max: int,
    lambda_grid=None,
    k_folds: int = 5,
    seed: int = 0,
    budget: int | None = None,
    standardize: bool = False,
) -> tuple[int, float, SignatureModel]:
    """Choose ``(m, lambda)`` jointly by k-fold CV instead of the penalty.

    Returns the order, the ridge strength and the model refitted on all data.
    Ties go to the smaller order, then the larger lambda.
    """
    paths = [time_augment(p) for p in paths]
    y = _check_targets(paths, targets)
    d = paths[0].d
    grid = default_lambda_grid() if lambda_grid is None else np.asarray(lambda_grid, dtype=np.float64)
    F = batch_signatures(paths, m_max, budget=budget)
    folds = kfold_ids(len(y), k_folds, seed)
    errors = np.zeros((m_max + 1, grid.size))
    for fold in range(k_folds):
        test = folds == fold
        for m in range(m_max + 1):
            q = sig_dim(d, m)
            coeffs = ridge_path(F[~test, :q], y[~test], grid, standardize=standardize)
            resid = y[test][None, :] - coeffs @ F[test, :q].T
            errors[m] += np.sum(resid**2, axis=1)
    best = errors.min()
    m_best = int(np.nonzero((errors == best).any(axis=1))[0][0])
    lam = float(grid[errors[m_best] == best].max())
    q = sig_dim(d, m_best)
    ridge = ridge_fit(F[:, :q], y, lam, standardize=standardize, shape=SigShape(d, m_best))
    return m_best, lam, SignatureModel(ridge=ridge, m=m_best)
