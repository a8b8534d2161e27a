"""Seeded simulation of functional covariates and scalar responses.

Three protocols are available:

* ``polysinus`` paths, each coordinate ``a1 + 10 a2 sin(2 pi t / a3) + 10 (t - a4)^3``
  with ``a1..a4 ~ U[0, 1]``, paired with either a linear response on the
  signature (``signature``) or the mean of the coordinates one step after the
  observed window (``mean_next_step``);
* ``gaussian_process`` paths ``alpha_k t + xi_k(t)`` with ``alpha_k ~ U[-3, 3]``
  and ``xi_k`` a centred process with covariance ``exp(-|s - t|)``, paired with
  the slope norm ``||alpha||`` (``trend_norm``).

Every random draw comes from a stream keyed by (seed, purpose, sample,
coordinate), so a sample's values never depend on how many other samples are
generated or in which order.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg

from .errors import ConditioningError, ConfigError, DataError
from .paths import SampledPath, uniform_times
from .signature import batch_signatures, check_capacity

__all__ = [
    "SimSpec",
    "stream",
    "gen_polysinus",
    "gen_signature_response",
    "gen_mean_next_step",
    "exponential_covariance",
    "gen_gaussian_process",
    "generate",
]

MODELS = ("polysinus", "gaussian_process")
RESPONSES = ("signature", "mean_next_step", "trend_norm")

# stream purposes
_POLY, _BETA, _NOISE, _GP_SLOPE, _GP_NOISE = range(5)


@dataclass(frozen=True)
class SimSpec:
    n: int
    d: int
    p: int
    seed: int = 0
    model: str = "polysinus"
    response: str = "signature"
    m_star: int = 5
    noise: float = 100.0

    def __post_init__(self):
        if self.n < 1 or self.d < 1 or self.p < 2:
            raise ConfigError(f"need n >= 1, d >= 1, p >= 2; got n={self.n}, d={self.d}, p={self.p}")
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}, expected one of {MODELS}")
        if self.response not in RESPONSES:
            raise ConfigError(f"unknown response {self.response!r}, expected one of {RESPONSES}")
        if self.response == "trend_norm" and self.model != "gaussian_process":
            raise ConfigError("trend_norm response requires the gaussian_process model")
        if self.model == "gaussian_process" and self.response != "trend_norm":
            raise ConfigError("the gaussian_process model only supports the trend_norm response")
        if self.response == "signature" and self.m_star < 0:
            raise ConfigError("m_star must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        return asdict(self)


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for one (purpose, sample, coordinate) key."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def _polysinus_values(alpha: np.ndarray, t: np.ndarray) -> np.ndarray:
    a1, a2, a3, a4 = alpha
    return a1 + 10.0 * a2 * np.sin(2.0 * np.pi * t / a3) + 10.0 * (t - a4) ** 3


def polysinus_parameters(seed: int, n: int, d: int) -> np.ndarray:
    """The ``(n, d, 4)`` array of ``U[0, 1]`` parameters used by :func:`gen_polysinus`."""
    return np.array([[stream(seed, _POLY, i, k).random(4) for k in range(d)] for i in range(n)])


def gen_polysinus(spec: SimSpec, alpha: np.ndarray | None = None):
    """Sample polysinus paths on the uniform partition of [0, 1].

    Parameters
    ----------
    spec : SimSpec
    alpha : array of shape (n, d, 4), optional
        Explicit parameters instead of seeded ``U[0, 1]`` draws.

    Returns
    -------
    paths : list of SampledPath
    next_values : ndarray of shape (n, d) or None
        Values at the extra grid point ``t_p`` when the response is
        ``mean_next_step``. The grid is then ``p + 1`` points on [0, 1] and
        the paths keep the first ``p``.
    """
    if spec.model != "polysinus":
        raise ConfigError(f"spec model is {spec.model!r}, not polysinus")
    if alpha is None:
        alpha = polysinus_parameters(spec.seed, spec.n, spec.d)
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (spec.n, spec.d, 4):
        raise DataError(f"alpha must have shape {(spec.n, spec.d, 4)}, got {alpha.shape}")
    with_next = spec.response == "mean_next_step"
    grid = uniform_times(spec.p + 1 if with_next else spec.p)
    paths, nxt = [], []
    for i in range(spec.n):
        vals = np.column_stack([_polysinus_values(alpha[i, k], grid) for k in range(spec.d)])
        paths.append(SampledPath(times=grid[: spec.p], values=vals[: spec.p]))
        nxt.append(vals[spec.p] if with_next else None)
    return paths, (np.array(nxt) if with_next else None)


def gen_signature_response(paths, m_star: int, seed: int, noise: float = 100.0, beta=None) -> np.ndarray:
    """``Y = <beta, S^{m*}(x)> + eps`` on the paths as given (no time augmentation).

    One ``beta`` is drawn for the whole dataset with ``beta_j = u_j / 1000``,
    ``u_j ~ U[0, 1]``; ``eps ~ U[-noise, noise]`` independently per sample.
    """
    paths = list(paths)
    if not paths:
        raise DataError("no paths given")
    d = paths[0].d
    size = check_capacity(d, m_star)
    if beta is None:
        beta = stream(seed, _BETA).random(size) / 1000.0
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (size,):
        raise DataError(f"beta must have length {size}")
    feats = batch_signatures(paths, m_star)
    eps = np.array([stream(seed, _NOISE, i).uniform(-noise, noise) for i in range(len(paths))])
    return feats @ beta + eps


def gen_mean_next_step(next_values) -> np.ndarray:
    """Average over coordinates of the value one step past the window."""
    if next_values is None:
        raise DataError("next-step values are missing; generate with response='mean_next_step'")
    arr = np.asarray(next_values, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError("next-step values must be an (n, d) array")
    return arr.mean(axis=1)


def exponential_covariance(t: np.ndarray, length_scale: float = 1.0) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    return np.exp(-np.abs(t[:, None] - t[None, :]) / length_scale)


def _jittered_cholesky(C: np.ndarray, start: float = 1e-10, stop: float = 1e-6) -> np.ndarray:
    jitter = start
    eye = np.eye(C.shape[0])
    while jitter <= stop * (1 + 1e-9):
        try:
            return scipy.linalg.cholesky(C + jitter * eye, lower=True)
        except np.linalg.LinAlgError:
            jitter *= 10
    raise ConditioningError(f"covariance not positive definite even with jitter {stop:g}")


def gen_gaussian_process(spec: SimSpec, slopes=None):
    """Sample trended Gaussian-process paths and their slope-norm responses.

    Parameters
    ----------
    spec : SimSpec
    slopes : array of shape (n, d), optional
        Explicit trend slopes instead of ``U[-3, 3]`` draws.

    Returns
    -------
    paths : list of SampledPath
    targets : ndarray of shape (n,)
    """
    if spec.model != "gaussian_process":
        raise ConfigError(f"spec model is {spec.model!r}, not gaussian_process")
    t = uniform_times(spec.p)
    L = _jittered_cholesky(exponential_covariance(t))
    if slopes is None:
        slopes = np.array(
            [[stream(spec.seed, _GP_SLOPE, i, k).uniform(-3.0, 3.0) for k in range(spec.d)] for i in range(spec.n)]
        )
    slopes = np.asarray(slopes, dtype=np.float64)
    if slopes.shape != (spec.n, spec.d):
        raise DataError(f"slopes must have shape {(spec.n, spec.d)}, got {slopes.shape}")
    paths = []
    for i in range(spec.n):
        z = np.column_stack([stream(spec.seed, _GP_NOISE, i, k).standard_normal(spec.p) for k in range(spec.d)])
        paths.append(SampledPath(times=t, values=t[:, None] * slopes[i] + L @ z))
    return paths, np.linalg.norm(slopes, axis=1)


def generate(spec: SimSpec):
    """Paths and targets for any supported (model, response) pair."""
    if spec.model == "gaussian_process":
        return gen_gaussian_process(spec)
    paths, nxt = gen_polysinus(spec)
    if spec.response == "mean_next_step":
        return paths, gen_mean_next_step(nxt)
    return paths, gen_signature_response(paths, spec.m_star, spec.seed, noise=spec.noise)
