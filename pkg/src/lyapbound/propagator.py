"""Fundamental solutions U(t0 -> t1) of x' = A(t) x.

Piecewise-constant signals are stepped exactly with matrix exponentials,
split at every jump and every ``step`` inside a constancy interval.
Continuous (periodic) signals use classical RK4 with a fixed step.  All
products are carried as ``(unit-scale matrix, log factor)`` pairs so that
horizons of 10^4 and beyond never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import StepTooLarge
from .matrix_core import as_array
from .signals import MatrixSignal, PeriodicSignal

DEFAULT_PIECEWISE_STEP = 1.0
_TAYLOR_THETA = 0.5
_BAND = (0.5, 2.0)


def default_step(signal: MatrixSignal) -> float:
    if isinstance(signal, PeriodicSignal):
        return min(1e-2, signal.period / 256)
    return DEFAULT_PIECEWISE_STEP


# ---------------------------------------------------------------------------
# matrix exponential


def _taylor_degree(tol):
    m, term = 1, _TAYLOR_THETA
    while term * math.exp(_TAYLOR_THETA) > tol:
        m += 1
        term *= _TAYLOR_THETA / m
    return m


def _taylor_batch(x, degree):
    n = x.shape[-1]
    eye = np.eye(n)
    e = eye + x / degree
    for k in range(degree - 1, 0, -1):
        e = eye + (x @ e) / k
    return e


def _squarings(norms):
    with np.errstate(divide="ignore"):
        s = np.ceil(np.log2(norms / _TAYLOR_THETA))
    return np.maximum(s, 0).astype(int)


def expm_scaled_batch(a: np.ndarray, tol: float = 1e-16):
    """exp(a_k) for a stack of ML-matrices, returned as ``(units, logs)``
    with ``exp(a_k) = exp(logs[k]) * units[k]``.

    Each matrix is shifted to ``a + c I >= 0`` so every Taylor term and every
    squaring involves only nonnegative numbers; the shift goes into the log
    factor.  Squarings renormalise by the largest entry, so nothing overflows.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[-1]
    diag = np.diagonal(a, axis1=1, axis2=2)
    c = np.maximum(0.0, -diag.min(axis=1))
    b = a + c[:, None, None] * np.eye(n)
    s = _squarings(np.abs(b).sum(axis=1).max(axis=1))
    degree = _taylor_degree(tol)
    units = np.empty_like(b)
    logs = -c.copy()
    for sv in np.unique(s):
        idx = np.flatnonzero(s == sv)
        e = _taylor_batch(b[idx] / 2.0**sv, degree)
        lg = np.zeros(len(idx))
        for _ in range(sv):
            e = e @ e
            top = e.max(axis=(1, 2))
            e /= top[:, None, None]
            lg = 2.0 * lg + np.log(top)
        units[idx] = e
        logs[idx] += lg
    return units, logs


def expm(a, tol: float = 1e-12) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a Taylor kernel."""
    a = np.array(as_array(a), dtype=float)
    n = a.shape[0]
    off = a[~np.eye(n, dtype=bool)]
    if np.all(off >= 0):
        units, logs = expm_scaled_batch(a[None], tol=min(tol, 1e-16))
        return math.exp(logs[0]) * units[0]
    s = int(_squarings(np.array([np.abs(a).sum(axis=0).max()]))[0])
    e = _taylor_batch((a / 2.0**s)[None], _taylor_degree(min(tol, 1e-16)))[0]
    for _ in range(s):
        e = e @ e
    return e


# ---------------------------------------------------------------------------
# scaled products


@dataclass
class ScaledMatrix:
    """Represents ``exp(log_scale) * m``."""

    m: np.ndarray
    log_scale: float = 0.0

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n), 0.0)

    def dense(self) -> np.ndarray:
        return math.exp(self.log_scale) * self.m

    def log_norm(self, norm: str = "fro") -> float:
        if norm == "fro":
            v = float(np.sqrt(np.sum(self.m * self.m)))
        elif norm == "max":
            v = float(np.abs(self.m).max())
        elif norm == "2":
            v = float(np.linalg.norm(self.m, 2))
        else:
            raise ValueError(f"unknown norm {norm!r}")
        return self.log_scale + math.log(v)

    def renormalized(self) -> "ScaledMatrix":
        m, ls = _renorm(self.m, self.log_scale)
        return ScaledMatrix(m, ls)

    def __matmul__(self, other: "ScaledMatrix") -> "ScaledMatrix":
        return ScaledMatrix(self.m @ other.m, self.log_scale + other.log_scale).renormalized()


def _renorm(m, log_scale):
    nrm = math.sqrt(float(np.sum(m * m)))
    if nrm == 0.0 or not math.isfinite(nrm):
        raise FloatingPointError("propagator lost scale (zero or non-finite norm)")
    if _BAND[0] <= nrm <= _BAND[1]:
        return m, log_scale
    return m / nrm, log_scale + math.log(nrm)


def _tree_product(units, logs):
    """Ordered product units[K-1] @ ... @ units[0] along axis -3.

    Leading batch axes are kept.  Pairs are multiplied level by level and each
    partial product is renormalised to unit Frobenius norm.
    """
    units = np.asarray(units)
    logs = np.asarray(logs, dtype=float)
    n = units.shape[-1]
    while units.shape[-3] > 1:
        k = units.shape[-3]
        if k % 2:
            pad = np.broadcast_to(np.eye(n), units.shape[:-3] + (1, n, n))
            units = np.concatenate([units, pad], axis=-3)
            logs = np.concatenate([logs, np.zeros(logs.shape[:-1] + (1,))], axis=-1)
        early, late = units[..., 0::2, :, :], units[..., 1::2, :, :]
        units = late @ early
        nrm = np.sqrt(np.sum(units * units, axis=(-2, -1)))
        units = units / nrm[..., None, None]
        logs = logs[..., 0::2] + logs[..., 1::2] + np.log(nrm)
    return units[..., 0, :, :], logs[..., 0]


# ---------------------------------------------------------------------------
# step factors


def _pieces(signal, t0, t1, step):
    """Split constancy intervals into pieces of length <= step.

    Returns (end_times, durations, modes)."""
    segs = signal.segments(t0, t1)
    if not segs:
        return np.zeros(0), np.zeros(0), np.zeros(0, dtype=int)
    starts = np.array([s[0] for s in segs])
    ends = np.array([s[1] for s in segs])
    modes = np.array([s[2] for s in segs], dtype=int)
    lengths = ends - starts
    counts = np.maximum(1, np.ceil(lengths / step - 1e-12).astype(int))
    seg_idx = np.repeat(np.arange(len(segs)), counts)
    first = np.cumsum(counts) - counts
    within = np.arange(len(seg_idx)) - first[seg_idx]
    piece_start = starts[seg_idx] + within * step
    is_last = within == counts[seg_idx] - 1
    piece_end = np.where(is_last, ends[seg_idx], piece_start + step)
    keep = piece_end > piece_start
    return piece_end[keep], (piece_end - piece_start)[keep], modes[seg_idx][keep]


def _exact_factors(signal, t0, t1, step):
    ends, dur, modes = _pieces(signal, t0, t1, step)
    if len(dur) == 0:
        n = signal.n
        return ends, np.zeros((0, n, n)), np.zeros(0)
    mats = np.asarray(signal.mode_matrices)
    keys = np.stack([modes.astype(float), dur], axis=1)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    um = uniq[:, 0].astype(int)
    units, logs = expm_scaled_batch(uniq[:, 1][:, None, None] * mats[um])
    return ends, units[inverse], logs[inverse]


def rk4_grid(t0, t1, step):
    """Uniform grid from t0 to t1 with spacing <= step."""
    k = max(1, int(math.ceil((t1 - t0) / step - 1e-12)))
    return t0 + (t1 - t0) * np.arange(k + 1) / k


def _check_rk4_step(signal, step):
    if step > signal.period / 16:
        raise StepTooLarge(f"RK4 step {step} exceeds period/16 = {signal.period / 16}")


def raw_many(signal, ts):
    return np.array([signal.raw(t) for t in ts])


def _rk4_factors(signal, t0, t1, step):
    _check_rk4_step(signal, step)
    grid = rk4_grid(t0, t1, step)
    h = grid[1] - grid[0]
    nodes = raw_many(signal, np.concatenate([grid, grid[:-1] + 0.5 * h]))
    k = len(grid) - 1
    n = signal.n
    eye = np.eye(n)
    # the scalar part tr(A)/n commutes with everything: integrate it exactly
    # up to Simpson error and step only the trace-free part with RK4, so
    # that A -> A + cI shifts the log factors by c*h and nothing else
    s = np.trace(nodes, axis1=-2, axis2=-1) / n
    nodes = nodes - s[:, None, None] * eye
    s0, s1, sm = s[:k], s[1 : k + 1], s[k + 1 :]
    a0, a1, am = nodes[:k], nodes[1 : k + 1], nodes[k + 1 :]
    k1 = a0
    k2 = am @ (eye + 0.5 * h * k1)
    k3 = am @ (eye + 0.5 * h * k2)
    k4 = a1 @ (eye + h * k3)
    m = eye + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return grid[1:], m, (h / 6.0) * (s0 + 4.0 * sm + s1)


def step_factors(signal, t0, t1, step):
    """(end_times, factors, log_factors) with U(t0 -> t1) the ordered
    product of the factors."""
    if step <= 0:
        raise ValueError("step must be positive")
    if signal.piecewise_constant:
        return _exact_factors(signal, t0, t1, step)
    return _rk4_factors(signal, t0, t1, step)


# ---------------------------------------------------------------------------
# public operations


def propagate(signal: MatrixSignal, t0: float, t1: float, step: float | None = None, start: ScaledMatrix | None = None) -> ScaledMatrix:
    """U(t0 -> t1), optionally left-multiplied onto ``start``."""
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    step = default_step(signal) if step is None else step
    cur = start if start is not None else ScaledMatrix.identity(signal.n)
    if t1 == t0:
        if step <= 0:
            raise ValueError("step must be positive")
        return cur
    _, units, logs = step_factors(signal, t0, t1, step)
    if len(logs) == 0:
        return cur
    m, lg = _tree_product(units, logs)
    return ScaledMatrix(m, float(lg)) @ cur


@dataclass
class Trajectory:
    """x(t; t0, x0) at recorded times; state k is exp(log_scales[k]) * vectors[k]."""

    times: np.ndarray
    vectors: np.ndarray
    log_scales: np.ndarray
    x0: np.ndarray

    def log_components(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.vectors) + self.log_scales[:, None]

    def log_norms(self) -> np.ndarray:
        return np.log(np.linalg.norm(self.vectors, axis=1)) + self.log_scales

    def log_sums(self) -> np.ndarray:
        return np.log(self.vectors.sum(axis=1)) + self.log_scales

    def states(self) -> np.ndarray:
        return self.vectors * np.exp(self.log_scales)[:, None]


def solve_trajectory(signal: MatrixSignal, t0: float, x0, t1: float, step: float | None = None, record_every: int = 1) -> Trajectory:
    """Solve x' = A(t) x from x(t0) = x0, recording every ``record_every``
    steps (and always at t1)."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (signal.n,) or not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be a finite vector of the signal dimension")
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    step = default_step(signal) if step is None else step
    v, ls = _renorm_vec(x0.copy(), 0.0)
    times, vecs, logs = [t0], [v], [ls]
    if t1 > t0:
        ends, units, flogs = step_factors(signal, t0, t1, step)
        k = len(ends)
        r = min(record_every, k)
        c = -(-k // r)
        pad = c * r - k
        n = signal.n
        if pad:
            units = np.concatenate([units, np.broadcast_to(np.eye(n), (pad, n, n))])
            flogs = np.concatenate([flogs, np.zeros(pad)])
        chunk_u, chunk_l = _tree_product(units.reshape(c, r, n, n), flogs.reshape(c, r))
        rec_times = ends[np.minimum(np.arange(1, c + 1) * r, k) - 1]
        for i in range(c):
            v = chunk_u[i] @ v
            v, ls = _renorm_vec(v, ls + float(chunk_l[i]))
            times.append(float(rec_times[i]))
            vecs.append(v)
            logs.append(ls)
    return Trajectory(np.array(times), np.array(vecs), np.array(logs), x0)


def _renorm_vec(v, ls):
    nrm = float(np.linalg.norm(v))
    if nrm == 0.0:
        return v, ls
    if _BAND[0] <= nrm <= _BAND[1]:
        return v, ls
    return v / nrm, ls + math.log(nrm)
