"""Ridge regression on feature matrices with an unpenalized intercept column.

The objective is

    (1/n) ||y - F beta||^2 + lam * sum_{j penalized} beta_j^2

where by default column 0 is the intercept (for signature features it is the
order-0 coefficient, identically 1) and is left out of the penalty.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConditioningError, ConfigError, DataError
from .signature import SigShape

__all__ = [
    "RidgeModel",
    "default_lambda_grid",
    "ridge_fit",
    "ridge_path",
    "ridge_objective",
    "predict",
    "empirical_risk",
    "kfold_ids",
    "cv_errors",
    "cv_select_lambda",
]

# largest condition number accepted for an unregularized (lam = 0) solve
MAX_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class RidgeModel:
    """Fitted ridge weights.

    ``coeffs`` always act on the raw (unstandardized) features.
    ``shape`` is set when the features are signature coefficients.
    """

    coeffs: np.ndarray
    lam: float
    shape: SigShape | None = None
    intercept: bool = True

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=np.float64)
        if coeffs.ndim != 1:
            raise DataError("coefficients must be a vector")
        if self.shape is not None and coeffs.size != self.shape.len:
            raise DataError(f"{coeffs.size} coefficients for signature shape of length {self.shape.len}")
        if not np.all(np.isfinite(coeffs)):
            raise ConditioningError("ridge produced non-finite coefficients")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def n_features(self) -> int:
        return self.coeffs.size


def default_lambda_grid(low: float = 1e-6, high: float = 1e3, per_decade: int = 10) -> np.ndarray:
    """Logarithmic grid with ``per_decade`` points per decade, endpoints included."""
    n = int(round(np.log10(high / low) * per_decade)) + 1
    return np.logspace(np.log10(low), np.log10(high), n)


def _check_xy(features, targets):
    F = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64).ravel()
    if F.ndim != 2:
        raise DataError(f"features must be 2-D, got shape {F.shape}")
    n, q = F.shape
    if n < 1 or q < 1:
        raise DataError(f"need at least one row and one column, got {F.shape}")
    if y.size != n:
        raise DataError(f"{n} feature rows but {y.size} targets")
    if not (np.all(np.isfinite(F)) and np.all(np.isfinite(y))):
        raise DataError("features or targets contain NaN or Inf")
    return F, y


def _penalty_mask(q: int, intercept: bool) -> np.ndarray:
    mask = np.ones(q)
    if intercept:
        mask[0] = 0.0
    return mask


def _solve_spd(A: np.ndarray, rhs: np.ndarray, regularized: bool) -> np.ndarray:
    """Solve a symmetric positive (semi)definite system.

    A Cholesky solve is tried first. Unregularized systems must also pass a
    condition-number check.
    """
    if not regularized:
        cond = np.linalg.cond(A)
        if not np.isfinite(cond) or cond > MAX_CONDITION:
            raise ConditioningError(
                f"unregularized normal equations are singular or ill-conditioned (cond={cond:.3g}); use lam > 0"
            )
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
        return scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    except np.linalg.LinAlgError:
        if not regularized:
            raise ConditioningError("normal equations are not positive definite") from None
    # positive semidefinite in exact arithmetic but not numerically:
    # fall back to a symmetric eigendecomposition with a floor on the spectrum
    w, V = scipy.linalg.eigh(A, check_finite=False)
    floor = max(w.max(), 0.0) * np.finfo(float).eps * A.shape[0]
    w = np.maximum(w, floor)
    return V @ ((V.T @ rhs) / w)


def _fit_primal(F, y, lam, mask):
    n = F.shape[0]
    A = F.T @ F / n
    A[np.diag_indices_from(A)] += lam * mask
    rhs = F.T @ y / n
    return _solve_spd(A, rhs, regularized=lam > 0)


def _fit_dual(F, y, lam, mask):
    """Solve via the n x n kernel system when there are more columns than rows.

    Unpenalized columns are projected out first; the penalized weights are then
    ``P^T (P P^T + n lam I)^{-1} r`` with ``P`` and ``r`` the projected
    features and targets.
    """
    n = F.shape[0]
    free = mask == 0
    U, P = F[:, free], F[:, ~free]
    if U.shape[1]:
        Q, R = np.linalg.qr(U)
        P_res = P - Q @ (Q.T @ P)
        y_res = y - Q @ (Q.T @ y)
    else:
        P_res, y_res = P, y
    K = P_res @ P_res.T
    K[np.diag_indices_from(K)] += n * lam
    alpha = _solve_spd(K, y_res, regularized=True)
    beta_pen = P_res.T @ alpha
    beta = np.empty(F.shape[1])
    beta[~free] = beta_pen
    if U.shape[1]:
        beta[free] = scipy.linalg.solve_triangular(R, Q.T @ (y - P @ beta_pen))
    return beta


def ridge_fit(
    features,
    targets,
    lam: float,
    *,
    intercept: bool = True,
    standardize: bool = False,
    shape: SigShape | None = None,
) -> RidgeModel:
    """Fit ridge weights by solving the regularized normal equations.

    Parameters
    ----------
    features : array of shape (n, q)
        Design matrix. With ``intercept=True`` column 0 is not penalized.
    targets : array of shape (n,)
    lam : float
        Ridge strength, >= 0. ``lam = 0`` requires a well-conditioned Gram matrix.
    standardize : bool
        Scale penalized columns to unit standard deviation before fitting.
        The returned coefficients are mapped back to the raw columns.
    shape : SigShape, optional
        Recorded on the model when the columns are signature coefficients.

    Raises
    ------
    ConditioningError
        If ``lam = 0`` and the system is singular.
    """
    F, y = _check_xy(features, targets)
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0:
        raise ConfigError(f"lam must be finite and >= 0, got {lam}")
    n, q = F.shape
    mask = _penalty_mask(q, intercept)
    scale = np.ones(q)
    if standardize:
        scale = _column_scale(F, mask)
        F = F / scale
    if q > n and lam > 0:
        beta = _fit_dual(F, y, lam, mask)
    else:
        if q > n and mask.any():
            raise ConditioningError(f"{q} features for {n} samples needs lam > 0")
        beta = _fit_primal(F, y, lam, mask)
    return RidgeModel(coeffs=beta / scale, lam=lam, shape=shape, intercept=intercept)


def _column_scale(F: np.ndarray, mask: np.ndarray) -> np.ndarray:
    sd = F.std(axis=0)
    rms = np.sqrt(np.mean(F**2, axis=0))
    # columns constant up to rounding (e.g. pure time words) stay unscaled
    varying = sd > 1e-9 * rms
    return np.where((mask > 0) & varying, sd, 1.0)


def ridge_path(features, targets, grid, *, intercept: bool = True, standardize: bool = False) -> np.ndarray:
    """Ridge coefficients for every value of ``grid`` from a single SVD.

    Unpenalized columns are projected out, the penalized block is
    decomposed once, and each lambda costs only a rescaling of the singular
    values. Mathematically identical to calling :func:`ridge_fit` per value.

    Returns
    -------
    ndarray of shape (len(grid), q)
    """
    F, y = _check_xy(features, targets)
    grid = np.asarray(grid, dtype=np.float64).ravel()
    if grid.size == 0 or np.any(grid < 0) or not np.all(np.isfinite(grid)):
        raise ConfigError("lambda grid must be non-empty, finite and >= 0")
    n, q = F.shape
    mask = _penalty_mask(q, intercept)
    scale = _column_scale(F, mask) if standardize else np.ones(q)
    F = F / scale
    free = mask == 0
    U, P = F[:, free], F[:, ~free]
    if U.shape[1]:
        Q, R = np.linalg.qr(U)
        P_res = P - Q @ (Q.T @ P)
        y_res = y - Q @ (Q.T @ y)
    else:
        P_res, y_res = P, y
    W, sv, Vt = np.linalg.svd(P_res, full_matrices=False)
    uy = W.T @ y_res
    out = np.empty((grid.size, q))
    for g, lam in enumerate(grid):
        if lam == 0:
            if q > n or sv.size == 0 or sv.min() <= sv.max() / np.sqrt(MAX_CONDITION):
                raise ConditioningError("unregularized ridge path is singular or ill-conditioned; use lam > 0")
        shrink = sv / (sv**2 + n * lam)
        beta_pen = Vt.T @ (shrink * uy)
        out[g, ~free] = beta_pen
        if U.shape[1]:
            out[g, free] = scipy.linalg.solve_triangular(R, Q.T @ (y - P @ beta_pen))
    return out / scale


def ridge_objective(model: RidgeModel, features, targets) -> float:
    """Penalized objective value of ``model`` on the given data."""
    F, y = _check_xy(features, targets)
    mask = _penalty_mask(F.shape[1], model.intercept)
    return empirical_risk(model, F, y) + model.lam * float(np.sum(mask * model.coeffs**2))


def predict(model: RidgeModel, features) -> np.ndarray:
    F = np.asarray(features, dtype=np.float64)
    if F.ndim != 2 or F.shape[1] != model.n_features:
        raise DataError(f"expected {model.n_features} feature columns, got shape {F.shape}")
    return F @ model.coeffs


def empirical_risk(model: RidgeModel, features, targets) -> float:
    """Mean squared residual, without the penalty term."""
    y = np.asarray(targets, dtype=np.float64).ravel()
    pred = predict(model, features)
    if pred.size != y.size:
        raise DataError(f"{pred.size} feature rows but {y.size} targets")
    return float(np.mean((y - pred) ** 2))


def kfold_ids(n: int, k: int, seed: int = 0) -> np.ndarray:
    """Fold label per row: seeded shuffle, then ``k`` contiguous folds."""
    if k < 2:
        raise ConfigError(f"need k >= 2 folds, got {k}")
    if n < k:
        raise DataError(f"cannot split {n} samples into {k} folds")
    order = np.random.default_rng(seed).permutation(n)
    ids = np.empty(n, dtype=np.int64)
    for fold, rows in enumerate(np.array_split(order, k)):
        ids[rows] = fold
    return ids


def cv_errors(features, targets, grid, k: int = 5, seed: int = 0, fold_ids=None, **fit_kwargs) -> np.ndarray:
    """Mean out-of-fold squared error for every value in ``grid``."""
    F, y = _check_xy(features, targets)
    grid = np.asarray(grid, dtype=np.float64).ravel()
    if grid.size == 0:
        raise ConfigError("lambda grid is empty")
    if fold_ids is None:
        fold_ids = kfold_ids(len(y), k, seed)
    fold_ids = np.asarray(fold_ids)
    sq = np.zeros(grid.size)
    for fold in np.unique(fold_ids):
        test = fold_ids == fold
        coeffs = ridge_path(F[~test], y[~test], grid, **fit_kwargs)
        resid = y[test][None, :] - coeffs @ F[test].T
        sq += np.sum(resid**2, axis=1)
    return sq / len(y)


def cv_select_lambda(features, targets, grid=None, k: int = 5, seed: int = 0, fold_ids=None, **fit_kwargs) -> float:
    """Grid value with the smallest k-fold CV error; ties go to the larger value."""
    grid = default_lambda_grid() if grid is None else np.asarray(grid, dtype=np.float64).ravel()
    if grid.size == 0 or np.any(grid <= 0):
        raise ConfigError("lambda grid must be non-empty and positive")
    errors = cv_errors(features, targets, grid, k=k, seed=seed, fold_ids=fold_ids, **fit_kwargs)
    best = errors.min()
    candidates = grid[errors == best]
    return float(candidates.max())
