"""Square matrices with nonnegative off-diagonal entries (ML- or Metzler
matrices), their dominant eigenvalue, and the classical lower bounds on it.

The bound formulas are written for stacks of shape ``(..., n, n)`` so that
the time-dependent bounds in :mod:`lyapbound.bounds` can reuse them on
batches of sampled matrices.
"""

from __future__ import annotations

import json
import math
from typing import NamedTuple

import numpy as np

from .errors import (
    BadRange,
    DimensionError,
    MatrixFormatError,
    NoConvergence,
    NotML,
)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000

# power iteration hands over to bisection after this many sweeps
_POWER_BUDGET = 1000
_STALL_SWEEPS = 25


class SquareMatrix:
    """Read-only n x n array of finite reals."""

    __slots__ = ("a",)

    def __init__(self, entries):
        a = np.array(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise DimensionError(f"expected a non-empty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise MatrixFormatError("matrix has non-finite entries")
        a.flags.writeable = False
        self.a = a

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.a if dtype is None else self.a.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, SquareMatrix):
            return NotImplemented
        return self.a.shape == other.a.shape and bool(np.all(self.a == other.a))

    def __hash__(self):
        return hash(self.a.tobytes())

    def __repr__(self):
        return f"{type(self).__name__}({self.a.tolist()!r})"

    def to_json(self) -> dict:
        return {"n": self.n, "rows": self.a.tolist()}


class MLMatrix(SquareMatrix):
    """Square matrix whose off-diagonal entries are all nonnegative."""

    __slots__ = ()

    def __init__(self, entries):
        super().__init__(entries)
        _check_offdiag(self.a)


def _check_offdiag(a):
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    bad = np.argwhere(off < 0)
    if bad.size:
        i, j = (int(k) for k in bad[0])  # argwhere is row-major
        raise NotML(i, j, float(a[i, j]))


def validate_ml(m) -> MLMatrix:
    """Return ``m`` as an :class:`MLMatrix`, raising :class:`NotML` on the
    first negative off-diagonal entry in row-major order."""
    if isinstance(m, MLMatrix):
        return m
    return MLMatrix(m.a if isinstance(m, SquareMatrix) else m)


def as_array(m) -> np.ndarray:
    return m.a if isinstance(m, SquareMatrix) else np.asarray(m, dtype=float)


def is_nonneg(x) -> bool:
    return bool(np.all(np.asarray(x) >= 0))


def is_pos(x) -> bool:
    return bool(np.all(np.asarray(x) > 0))


# ---------------------------------------------------------------------------
# dominant eigenvalue


def _shift_for(a: np.ndarray) -> float:
    return 1.0 + max(0.0, float(np.max(-np.diag(a))))


def _collatz_wielandt(b, x):
    y = b @ x
    with np.errstate(divide="ignore", invalid="ignore"):
        r = y / x
    if not np.all(np.isfinite(r)):
        return y, -math.inf, math.inf
    return y, float(r.min()), float(r.max())


def _above_dominant(a: np.ndarray, mu: float) -> bool:
    """True iff mu > d(a).

    mu*I - a is a Z-matrix; it is a nonsingular M-matrix (equivalently
    a - mu*I is Hurwitz stable) exactly when (mu*I - a) y = 1 has a strictly
    positive solution, which is a Collatz-Wielandt certificate
    max_i (a y)_i / y_i < mu.
    """
    n = a.shape[0]
    try:
        y = np.linalg.solve(mu * np.eye(n) - a, np.ones(n))
    except np.linalg.LinAlgError:
        return False
    return bool(np.all(np.isfinite(y)) and np.all(y > 0))


def _bisect(a, lo, hi, tol, max_iter):
    width = max(hi - lo, tol, 1.0)
    while not _above_dominant(a, hi):
        hi += width
        width *= 2
    width = max(hi - lo, tol, 1.0)
    while _above_dominant(a, lo):
        lo -= width
        width *= 2
    it = 0
    while hi - lo > tol:
        if it >= max_iter:
            raise NoConvergence(max_iter)
        mid = 0.5 * (lo + hi)
        if _above_dominant(a, mid):
            hi = mid
        else:
            lo = mid
        it += 1
    return 0.5 * (lo + hi)


def dominant_eigenvalue(a, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> float:
    """Dominant (largest real part) eigenvalue of an ML-matrix.

    Power iteration runs on the nonnegative matrix ``a + s*I`` with
    ``s = 1 + max(0, -min diag)``; the Collatz-Wielandt bracket of the
    positive iterate certifies convergence.  When the bracket stops
    shrinking (reducible or defective cases) the best bracket seeds a
    bisection on the stability of ``a - mu*I``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = as_array(validate_ml(a))
    n = a.shape[0]
    if n == 1:
        return float(a[0, 0])
    s = _shift_for(a)
    b = a + s * np.eye(n)

    x = np.ones(n)
    lo, hi = -math.inf, math.inf
    rq_prev = math.nan
    stalled = 0
    for _ in range(min(max_iter, _POWER_BUDGET)):
        y, clo, chi = _collatz_wielandt(b, x)
        lo, hi = max(lo, clo), min(hi, chi)
        if hi - lo <= tol:
            return 0.5 * (lo + hi) - s
        rq = float(x @ y) / float(x @ x)
        stalled = stalled + 1 if abs(rq - rq_prev) <= tol else 0
        if stalled >= _STALL_SWEEPS:
            break
        rq_prev = rq
        x = y / y.max()

    lo_d = lo - s if math.isfinite(lo) else float(np.max(np.diag(a)))
    hi_d = hi - s if math.isfinite(hi) else float(np.max(a.sum(axis=1)))
    return _bisect(a, lo_d, hi_d, tol, max_iter)


# ---------------------------------------------------------------------------
# static lower bounds (batched over leading axes)


def _sqrt_pair_products(a: np.ndarray) -> np.ndarray:
    """sqrt(a_jk * a_kj) for every ordered pair, products clamped at 0."""
    prod = a * np.swapaxes(a, -1, -2)
    return np.sqrt(np.maximum(prod, 0.0))


def kolotilina_values(a: np.ndarray) -> np.ndarray:
    n = a.shape[-1]
    root = _sqrt_pair_products(a)
    diag = np.trace(a, axis1=-2, axis2=-1)
    off = root.sum(axis=(-2, -1)) - np.trace(root, axis1=-2, axis2=-1)
    # off counts each j<k pair twice, matching the factor 2
    return (diag + off) / n


def min_row_sum_values(a: np.ndarray) -> np.ndarray:
    return a.sum(axis=-1).min(axis=-1)


def min_col_sum_values(a: np.ndarray) -> np.ndarray:
    return a.sum(axis=-2).min(axis=-1)


def pairwise_values(a: np.ndarray, i: int, j: int) -> np.ndarray:
    aij, aji = a[..., i, j], a[..., j, i]
    return 0.5 * (a[..., i, i] + a[..., j, j]) + np.sqrt(np.maximum(aij * aji, 0.0))


def kolotilina_bound_static(a) -> float:
    """(trace A + 2 sum_{j<k} sqrt(a_jk a_kj)) / N."""
    return float(kolotilina_values(as_array(validate_ml(a))))


class FrobeniusBounds(NamedTuple):
    min_row_sum: float
    min_col_sum: float
    argmin_row: int
    argmin_col: int


def frobenius_bounds_static(a) -> FrobeniusBounds:
    a = as_array(validate_ml(a))
    rows, cols = a.sum(axis=1), a.sum(axis=0)
    # np.argmin returns the first minimiser, i.e. the smallest index
    i, j = int(np.argmin(rows)), int(np.argmin(cols))
    return FrobeniusBounds(float(rows[i]), float(cols[j]), i, j)


def _check_pair(n, i, j):
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"pair ({i}, {j}) out of range for n = {n}")
    if i == j:
        raise IndexError("pairwise bound needs two distinct indices")


def pairwise_bound_static(a, i: int, j: int) -> float:
    a = as_array(validate_ml(a))
    _check_pair(a.shape[0], i, j)
    return float(pairwise_values(a, i, j))


def best_pairwise_bound_static(a) -> tuple[float, int, int]:
    a = as_array(validate_ml(a))
    n = a.shape[0]
    if n < 2:
        raise DimensionError("pairwise bounds need n >= 2")
    best = (-math.inf, -1, -1)
    for i in range(n):
        for j in range(i + 1, n):
            v = float(pairwise_values(a, i, j))
            if v > best[0]:
                best = (v, i, j)
    return best


def random_ml_matrix(
    n: int,
    seed: int,
    diag_range: tuple[float, float] = (-5.0, 5.0),
    offdiag_range: tuple[float, float] = (0.0, 5.0),
) -> MLMatrix:
    """Random ML-matrix with uniform diagonal and off-diagonal entries.

    Draws come from numpy's PCG64 generator, so a seed always yields the same
    matrix.
    """
    dlo, dhi = diag_range
    olo, ohi = offdiag_range
    if n < 1:
        raise BadRange("n must be >= 1")
    if dlo > dhi or olo > ohi:
        raise BadRange("empty range")
    if olo < 0:
        raise BadRange("off-diagonal range must be nonnegative")
    rng = np.random.default_rng(seed)
    a = rng.uniform(olo, ohi, size=(n, n))
    np.fill_diagonal(a, rng.uniform(dlo, dhi, size=n))
    return MLMatrix(a)


# ---------------------------------------------------------------------------
# text format


def parse_matrix(obj) -> SquareMatrix:
    """Parse ``{"n": int, "rows": [[...], ...]}`` (a dict or a JSON string)."""
    if isinstance(obj, (str, bytes)):
        obj = json.loads(obj)
    if not isinstance(obj, dict) or "rows" not in obj:
        raise MatrixFormatError('matrix must be an object with "rows"')
    rows = obj["rows"]
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise MatrixFormatError('"rows" must be a non-empty list of lists')
    n = obj.get("n", len(rows))
    if not isinstance(n, int) or isinstance(n, bool) or n != len(rows):
        raise MatrixFormatError(f'"n" = {n!r} does not match {len(rows)} rows')
    for k, r in enumerate(rows):
        if len(r) != n:
            raise MatrixFormatError(f"row {k} has {len(r)} entries, expected {n}")
        for v in r:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise MatrixFormatError(f"row {k} has a non-numeric entry {v!r}")
            if not math.isfinite(v):
                raise MatrixFormatError(f"row {k} has a non-finite entry")
    return SquareMatrix(rows)


def load_matrix(path) -> SquareMatrix:
    with open(path) as fh:
        return parse_matrix(json.load(fh))
