"""Truncated signatures of piecewise-linear paths.

Coefficients are stored flat and level-major: level 0 (the constant 1) first,
then the ``d`` level-1 coefficients, then the ``d**2`` level-2 coefficients,
and so on. Inside a level, multi-indices ``(i_1, ..., i_k)`` are ordered
lexicographically, so the last letter varies fastest. With this layout the
signature truncated at ``m`` is a prefix of the signature truncated at any
``M >= m``.

The signature of a polyline is exact: each segment contributes the tensor
exponential of its displacement, and segments are glued with Chen's identity.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapacityError, DataError
from .paths import SampledPath

__all__ = [
    "DEFAULT_BUDGET",
    "get_budget",
    "sig_dim",
    "check_capacity",
    "SigShape",
    "TruncatedSignature",
    "index_of",
    "word_of",
    "word_labels",
    "identity",
    "linear_segment_signature",
    "chen_concat",
    "signature",
    "batch_signatures",
]

DEFAULT_BUDGET = 10**7
_INDEX_MAX = np.iinfo(np.int64).max


def get_budget(budget: int | None = None) -> int:
    """Resolve the coefficient budget: explicit value, then ``SIGREG_BUDGET``, then default."""
    if budget is not None:
        return int(budget)
    env = os.environ.get("SIGREG_BUDGET")
    if env:
        try:
            return int(float(env))
        except ValueError:
            raise CapacityError(f"SIGREG_BUDGET={env!r} is not a number") from None
    return DEFAULT_BUDGET


def sig_dim(d: int, m: int) -> int:
    """Number of coefficients of a signature in R^d truncated at order m.

    ``s_d(m) = 1 + d + ... + d**m``.

    Raises
    ------
    CapacityError
        If the count does not fit in a 64-bit index.
    """
    d, m = int(d), int(m)
    if d < 1:
        raise DataError(f"dimension must be >= 1, got d={d}")
    if m < 0:
        raise DataError(f"truncation order must be >= 0, got m={m}")
    if d == 1:
        size = m + 1
    else:
        size = (d ** (m + 1) - 1) // (d - 1)
    if size > _INDEX_MAX:
        raise CapacityError(f"signature size for d={d}, m={m} overflows a 64-bit index")
    return size


def check_capacity(d: int, m: int, budget: int | None = None) -> int:
    """Return ``sig_dim(d, m)``, failing if it exceeds the coefficient budget."""
    size = sig_dim(d, m)
    limit = get_budget(budget)
    if size > limit:
        raise CapacityError(
            f"signature with d={d}, m={m} has {size} coefficients, "
            f"over the budget of {limit} (raise --budget or SIGREG_BUDGET)"
        )
    return size


@dataclass(frozen=True)
class SigShape:
    d: int
    m: int

    def __post_init__(self):
        # validates and fails on index overflow
        object.__setattr__(self, "_len", sig_dim(self.d, self.m))

    @property
    def len(self) -> int:
        return self._len

    def __len__(self):
        return self._len

    def level_slice(self, k: int) -> slice:
        """Flat positions of the level-``k`` block."""
        if not 0 <= k <= self.m:
            raise DataError(f"level {k} outside 0..{self.m}")
        start = sig_dim(self.d, k - 1) if k > 0 else 0
        return slice(start, start + self.d**k)


def index_of(shape: SigShape, multi_index: Sequence[int]) -> int:
    """Flat offset of a multi-index with letters in ``1..d``."""
    word = [int(i) for i in multi_index]
    k = len(word)
    if k > shape.m:
        raise DataError(f"multi-index of length {k} exceeds truncation order {shape.m}")
    offset = 0
    for i in word:
        if not 1 <= i <= shape.d:
            raise DataError(f"letter {i} outside 1..{shape.d}")
        offset = offset * shape.d + (i - 1)
    base = sig_dim(shape.d, k - 1) if k > 0 else 0
    return base + offset


def word_of(shape: SigShape, flat: int) -> tuple[int, ...]:
    """Inverse of :func:`index_of`."""
    flat = int(flat)
    if not 0 <= flat < shape.len:
        raise DataError(f"flat index {flat} outside 0..{shape.len - 1}")
    k = 0
    while flat >= sig_dim(shape.d, k):
        k += 1
    rest = flat - (sig_dim(shape.d, k - 1) if k > 0 else 0)
    word = []
    for _ in range(k):
        rest, letter = divmod(rest, shape.d)
        word.append(letter + 1)
    return tuple(reversed(word))


def word_labels(shape: SigShape) -> list[str]:
    """Column labels such as ``()``, ``(1)``, ``(1,2)`` in flat order."""
    return ["(" + ",".join(map(str, word_of(shape, j))) + ")" for j in range(shape.len)]


@dataclass(frozen=True, eq=False)
class TruncatedSignature:
    shape: SigShape
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=np.float64)
        if coeffs.shape != (self.shape.len,):
            raise DataError(f"expected {self.shape.len} coefficients, got shape {coeffs.shape}")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def d(self) -> int:
        return self.shape.d

    @property
    def m(self) -> int:
        return self.shape.m

    def level(self, k: int) -> np.ndarray:
        """Level-``k`` coefficients as a flat array of length ``d**k``."""
        return self.coeffs[self.shape.level_slice(k)]

    def __getitem__(self, multi_index) -> float:
        return float(self.coeffs[index_of(self.shape, multi_index)])

    def truncate(self, m: int) -> "TruncatedSignature":
        shape = SigShape(self.d, m)
        if m > self.m:
            raise DataError(f"cannot truncate order {self.m} signature at {m}")
        return TruncatedSignature(shape, self.coeffs[: shape.len])


def identity(d: int, m: int) -> TruncatedSignature:
    """Signature of a constant path: ``(1, 0, 0, ...)``."""
    shape = SigShape(d, m)
    coeffs = np.zeros(shape.len)
    coeffs[0] = 1.0
    return TruncatedSignature(shape, coeffs)


def linear_segment_signature(displacement, m: int, budget: int | None = None) -> TruncatedSignature:
    """Signature of a straight segment with the given displacement.

    The level-k block is the tensor power ``b^{(x)k} / k!``, built one level
    at a time from the previous one.
    """
    b = np.asarray(displacement, dtype=np.float64).ravel()
    if b.size == 0 or not np.all(np.isfinite(b)):
        raise DataError("displacement must be a non-empty finite vector")
    d = b.size
    check_capacity(d, m, budget)
    shape = SigShape(d, m)
    coeffs = np.empty(shape.len)
    coeffs[0] = 1.0
    prev = coeffs[0:1]
    for k in range(1, m + 1):
        block = coeffs[shape.level_slice(k)]
        np.multiply(prev[:, None], b[None, :] / k, out=block.reshape(-1, d))
        prev = block
    return TruncatedSignature(shape, coeffs)


def chen_concat(a: TruncatedSignature, b: TruncatedSignature) -> TruncatedSignature:
    """Signature of the concatenation of two paths from their signatures.

    Level k of the result is ``sum_{l=0..k} a_l (x) b_{k-l}``. Levels are
    overwritten from the highest down, so the lower levels of ``a`` are still
    intact when they are read.
    """
    if a.shape != b.shape:
        raise DataError(f"shape mismatch: {a.shape} vs {b.shape}")
    shape = a.shape
    m = shape.m
    out = np.array(a.coeffs)
    levels = [out[shape.level_slice(k)] for k in range(m + 1)]
    blevels = [b.coeffs[shape.level_slice(k)] for k in range(m + 1)]
    for k in range(m, 0, -1):
        # l = k term: a_k (x) b_0 = a_k, already in place
        acc = levels[k]
        for ell in range(k):
            acc += np.multiply.outer(levels[ell], blevels[k - ell]).ravel()
    return TruncatedSignature(shape, out)


def _extend_by_segments(buf: np.ndarray, disp: np.ndarray, d: int, m: int) -> None:
    """Multiply batched signatures in place by the exponentials of segments.

    ``buf`` has shape (n, s_d(m)); ``disp`` has shape (n_segments, n, d). For
    each segment this is ``chen_concat(S, linear_segment_signature(b))``
    evaluated in Horner form, highest level first:

        S_k <- S_k + (((b/k + S_1) (x) b/(k-1) + S_2) (x) ... + S_{k-1}) (x) b/1
    """
    n = buf.shape[0]
    starts = [0] + [sig_dim(d, k - 1) for k in range(1, m + 1)]
    levels = [buf[:, starts[k] : starts[k] + d**k] for k in range(m + 1)]
    inv = [0.0] + [1.0 / k for k in range(1, m + 1)]
    for b in disp:
        scaled = [None] + [b * inv[j] for j in range(1, m + 1)]
        for k in range(m, 0, -1):
            acc = b / k
            for j in range(1, k):
                acc += levels[j]
                acc = (acc[:, :, None] * scaled[k - j][:, None, :]).reshape(n, -1)
            levels[k] += acc


def signature(path: SampledPath, m: int, budget: int | None = None) -> TruncatedSignature:
    """Exact signature of the polyline through the samples, truncated at ``m``.

    Cost is O(p d^m): one tensor-exponential product per segment.
    Zero-length segments are skipped.
    """
    m = int(m)
    check_capacity(path.d, m, budget)
    shape = SigShape(path.d, m)
    buf = np.zeros((1, shape.len))
    buf[0, 0] = 1.0
    disp = path.increments()
    disp = disp[np.any(disp != 0.0, axis=1)]
    if m > 0 and len(disp):
        _extend_by_segments(buf, disp[:, None, :], path.d, m)
    return TruncatedSignature(shape, buf[0])


def _batch_block(paths: Sequence[SampledPath], d: int, m: int, size: int) -> np.ndarray:
    n = len(paths)
    buf = np.zeros((n, size))
    buf[:, 0] = 1.0
    if m == 0 or n == 0:
        return buf
    n_seg = max(path.p for path in paths) - 1
    # shorter paths are padded with zero segments, which act as the identity
    disp = np.zeros((n_seg, n, d))
    for i, path in enumerate(paths):
        inc = path.increments()
        disp[: len(inc), i, :] = inc
    _extend_by_segments(buf, disp, d, m)
    return buf


def batch_signatures(
    paths: Sequence[SampledPath],
    m: int,
    budget: int | None = None,
    n_jobs: int = 1,
    chunk_size: int = 256,
) -> np.ndarray:
    """Signature feature matrix, one row per path.

    Rows are computed independently, so chunks can be processed on several
    threads; the output does not depend on ``n_jobs``.

    Returns
    -------
    ndarray of shape (n, s_d(m))
    """
    paths = list(paths)
    if not paths:
        raise DataError("no paths given")
    d = paths[0].d
    for i, path in enumerate(paths):
        if path.d != d:
            raise DataError(f"path {i} has dimension {path.d}, expected {d}")
    m = int(m)
    size = check_capacity(d, m, budget)
    chunks = [paths[i : i + chunk_size] for i in range(0, len(paths), chunk_size)]
    if n_jobs > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            blocks = list(pool.map(lambda c: _batch_block(c, d, m, size), chunks))
    else:
        blocks = [_batch_block(c, d, m, size) for c in chunks]
    return np.vstack(blocks)
