"""Sampled multivariate paths and their piecewise-linear interpolants."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

__all__ = [
    "SampledPath",
    "from_matrix",
    "time_augment",
    "total_variation",
    "subdivide",
    "uniform_times",
]


def uniform_times(p: int) -> np.ndarray:
    """Uniform partition ``t_j = j / (p - 1)`` of [0, 1] with ``p`` points."""
    if p < 2:
        raise DataError(f"a path needs at least 2 samples, got p={p}")
    return np.arange(p, dtype=np.float64) / (p - 1)


@dataclass(frozen=True, eq=False)
class SampledPath:
    """A path in R^d given by ``p`` samples and the times they were taken at.

    The continuous path is the linear interpolation of the rows of
    ``values``. Instances are immutable: both arrays are stored read-only.

    Attributes
    ----------
    times : ndarray of shape (p,)
        Strictly increasing sampling times.
    values : ndarray of shape (p, d)
        Sample matrix, one row per time.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=np.float64)
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError(f"values must be a 2-D (p, d) array, got shape {values.shape}")
        if times.ndim != 1:
            raise DataError(f"times must be 1-D, got shape {times.shape}")
        p, d = values.shape
        if p < 2:
            raise DataError(f"a path needs at least 2 samples, got p={p}")
        if d < 1:
            raise DataError("a path needs at least one coordinate")
        if times.shape[0] != p:
            raise DataError(f"got {times.shape[0]} times for {p} samples")
        if not np.all(np.isfinite(values)):
            raise DataError("path values contain NaN or Inf")
        if not np.all(np.isfinite(times)):
            raise DataError("path times contain NaN or Inf")
        if np.any(np.diff(times) <= 0):
            raise DataError("times must be strictly increasing")
        times.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def increments(self) -> np.ndarray:
        """Segment displacements, shape (p - 1, d)."""
        return np.diff(self.values, axis=0)

    def __eq__(self, other):
        if not isinstance(other, SampledPath):
            return NotImplemented
        return (
            self.values.shape == other.values.shape
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        return f"SampledPath(p={self.p}, d={self.d})"


def from_matrix(values, times=None) -> SampledPath:
    """Build a path from a (p, d) sample matrix.

    A 1-D ``values`` array is read as a single coordinate. When ``times`` is
    omitted the samples are placed on the uniform partition of [0, 1].
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    if times is None:
        times = uniform_times(values.shape[0])
    return SampledPath(times=times, values=values)


def time_augment(path: SampledPath) -> SampledPath:
    """Append the sampling time as an extra, last coordinate.

    Times are used as given (no rescaling to [0, 1]).
    """
    values = np.column_stack([path.values, path.times])
    return SampledPath(times=path.times, values=values)


def total_variation(path: SampledPath) -> float:
    """Length of the polyline: sum of the Euclidean norms of its segments."""
    return float(np.sum(np.linalg.norm(path.increments(), axis=1)))


def subdivide(path: SampledPath, extra_points_per_segment: int) -> SampledPath:
    """Insert evenly spaced collinear points inside every segment.

    The geometric trace, and hence the signature, is unchanged.
    """
    k = int(extra_points_per_segment)
    if k < 0:
        raise DataError("extra_points_per_segment must be >= 0")
    if k == 0:
        return path
    # fractions 0, 1/(k+1), ..., k/(k+1) of each segment; the last vertex is appended
    frac = np.arange(k + 1, dtype=np.float64) / (k + 1)
    v0, dv = path.values[:-1], np.diff(path.values, axis=0)
    t0, dt = path.times[:-1], np.diff(path.times)
    values = (v0[:, None, :] + frac[None, :, None] * dv[:, None, :]).reshape(-1, path.d)
    times = (t0[:, None] + frac[None, :] * dt[:, None]).ravel()
    values = np.vstack([values, path.values[-1:]])
    times = np.append(times, path.times[-1])
    return SampledPath(times=times, values=values)
