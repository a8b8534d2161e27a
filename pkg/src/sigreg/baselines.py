"""Functional linear regression on a Fourier basis expansion.

Each coordinate of each path is projected by least squares onto
``{1, sin(2 pi j t), cos(2 pi j t)}`` for ``j = 1..(K-1)/2``; the resulting
``d * K`` coefficients feed a ridge (or plain least-squares) regression with
an unpenalized intercept. ``K`` and the ridge strength are chosen jointly by
k-fold cross-validation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConditioningError, ConfigError, DataError
from .paths import SampledPath
from .ridge import RidgeModel, default_lambda_grid, kfold_ids, predict, ridge_fit, ridge_path

__all__ = [
    "DEFAULT_K_GRID",
    "fourier_basis",
    "fourier_design",
    "expand",
    "BasisExpansion",
    "FourierModel",
    "fit_fourier_model",
]

DEFAULT_K_GRID = (5, 7, 9, 11, 13)


def fourier_basis(t, K: int) -> np.ndarray:
    """Basis matrix of shape (len(t), K): ``1, sin(2 pi t), cos(2 pi t), sin(4 pi t), ...``."""
    K = int(K)
    if K < 1 or K % 2 == 0:
        raise ConfigError(f"Fourier basis size must be odd and >= 1, got {K}")
    t = np.asarray(t, dtype=np.float64)
    cols = [np.ones_like(t)]
    for j in range(1, (K - 1) // 2 + 1):
        cols.append(np.sin(2 * np.pi * j * t))
        cols.append(np.cos(2 * np.pi * j * t))
    return np.column_stack(cols)


@dataclass(frozen=True, eq=False)
class BasisExpansion:
    """Per-coordinate basis coefficients, coordinate-major: row ``i`` holds
    the ``K`` coefficients of coordinate 1, then those of coordinate 2, ..."""

    n_basis: int
    coefficients: np.ndarray
    kind: str = "fourier"

    @property
    def d(self) -> int:
        return self.coefficients.shape[1] // self.n_basis


def _shared_grid(paths: Sequence[SampledPath]) -> np.ndarray:
    t = paths[0].times
    for i, path in enumerate(paths):
        if path.p != t.size or not np.array_equal(path.times, t):
            raise DataError(f"path {i} does not share the time grid of path 0")
        if path.d != paths[0].d:
            raise DataError(f"path {i} has dimension {path.d}, expected {paths[0].d}")
    return t


def fourier_design(paths: Sequence[SampledPath], K: int) -> np.ndarray:
    """Least-squares Fourier coefficients of every coordinate, shape (n, d*K)."""
    paths = list(paths)
    if not paths:
        raise DataError("no paths given")
    t = _shared_grid(paths)
    B = fourier_basis(t, K)
    if t.size < K or np.linalg.matrix_rank(B) < K:
        raise ConditioningError(f"{t.size} sample times cannot identify {K} Fourier coefficients")
    n, p, d = len(paths), t.size, paths[0].d
    values = np.stack([path.values for path in paths])  # (n, p, d)
    rhs = values.transpose(1, 0, 2).reshape(p, n * d)
    coef, *_ = np.linalg.lstsq(B, rhs, rcond=None)  # (K, n*d)
    return coef.reshape(K, n, d).transpose(1, 2, 0).reshape(n, d * K)


def expand(paths: Sequence[SampledPath], K: int) -> BasisExpansion:
    return BasisExpansion(n_basis=K, coefficients=fourier_design(paths, K))


def _with_intercept(X: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(X.shape[0]), X])


@dataclass(frozen=True, eq=False)
class FourierModel:
    n_basis: int
    lam: float
    ridge: RidgeModel
    ols: bool = False
    cv_error: float = float("nan")

    def predict(self, paths: Sequence[SampledPath]) -> np.ndarray:
        return predict(self.ridge, _with_intercept(fourier_design(paths, self.n_basis)))


def fit_fourier_model(
    paths: Sequence[SampledPath],
    targets,
    K_grid=DEFAULT_K_GRID,
    lambda_grid=None,
    k_folds: int = 5,
    seed: int = 0,
    ols: bool = False,
) -> FourierModel:
    """Fit the Fourier baseline with ``(K, lambda)`` chosen by k-fold CV.

    With ``ols=True`` the lambda grid is replaced by ``[0]`` and only ``K`` is
    cross-validated. Ties prefer the smaller ``K``, then the larger lambda.
    """
    paths = list(paths)
    y = np.asarray(targets, dtype=np.float64).ravel()
    if len(paths) != y.size:
        raise DataError(f"{len(paths)} paths but {y.size} targets")
    K_grid = [int(k) for k in K_grid]
    if not K_grid:
        raise ConfigError("K grid is empty")
    grid = np.array([0.0]) if ols else (default_lambda_grid() if lambda_grid is None else np.asarray(lambda_grid, float))
    if grid.size == 0:
        raise ConfigError("lambda grid is empty")
    folds = kfold_ids(y.size, k_folds, seed)
    designs = {K: _with_intercept(fourier_design(paths, K)) for K in sorted(set(K_grid))}
    best = None
    for K, X in designs.items():
        sq = np.zeros(grid.size)
        for fold in range(k_folds):
            test = folds == fold
            coeffs = ridge_path(X[~test], y[~test], grid)
            sq += np.sum((y[test][None, :] - coeffs @ X[test].T) ** 2, axis=1)
        for lam, err in zip(grid, sq / y.size):
            # strict < keeps the smaller K; equality within one K moves to the larger lambda
            if best is None or err < best[0] or (err == best[0] and K == best[1]):
                best = (float(err), K, lam)
    err, K, lam = best
    ridge = ridge_fit(designs[K], y, lam)
    return FourierModel(n_basis=K, lam=float(lam), ridge=ridge, ols=ols, cv_error=err)
