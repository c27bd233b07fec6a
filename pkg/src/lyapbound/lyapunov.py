"""Finite-horizon estimates of the top Lyapunov exponent."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .propagator import ScaledMatrix, default_step, propagate, solve_trajectory
from .signals import MatrixSignal


@dataclass
class LyapunovEstimate:
    lambda_hat: float
    horizon: float
    checkpoints: list  # (t, running estimate) pairs
    tail_spread: float
    log_scales: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "lambda_hat": self.lambda_hat,
            "horizon": self.horizon,
            "tail_spread": self.tail_spread,
            "checkpoints": [[t, v] for t, v in self.checkpoints],
        }


def _tail_spread(values):
    k = len(values)
    tail = values[k - max(1, -(-k // 4)) :]
    return float(max(tail) - min(tail))


def _checkpoint_times(horizon, checkpoints):
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if checkpoints < 1:
        raise ValueError("need at least one checkpoint")
    ts = [horizon * k / checkpoints for k in range(1, checkpoints + 1)]
    ts[-1] = horizon
    return ts


def top_exponent_matrix(
    signal: MatrixSignal,
    horizon: float,
    step: float | None = None,
    checkpoints: int = 100,
    norm: str = "fro",
) -> LyapunovEstimate:
    """ln ||U(0 -> horizon)|| / horizon, with the running quotient recorded
    at ``checkpoints`` evenly spaced times."""
    step = default_step(signal) if step is None else step
    u = ScaledMatrix.identity(signal.n)
    prev = 0.0
    pts, logs = [], []
    for t in _checkpoint_times(horizon, checkpoints):
        u = propagate(signal, prev, t, step, start=u)
        pts.append((t, u.log_norm(norm) / t))
        logs.append(u.log_scale)
        prev = t
    vals = [v for _, v in pts]
    return LyapunovEstimate(vals[-1], float(horizon), pts, _tail_spread(vals), logs)


def top_exponent_vector(
    signal: MatrixSignal,
    x0,
    horizon: float,
    step: float | None = None,
    checkpoints: int = 100,
) -> LyapunovEstimate:
    """Same quotient for ||x(t)|| with x(0) = x0 strictly positive."""
    x0 = np.asarray(x0, dtype=float)
    if not np.all(x0 > 0):
        raise ValueError("x0 must be strictly positive")
    step = default_step(signal) if step is None else step
    x0n = float(np.linalg.norm(x0))
    v, ls = x0 / x0n, math.log(x0n)
    prev = 0.0
    pts, logs = [], []
    for t in _checkpoint_times(horizon, checkpoints):
        tr = solve_trajectory(signal, prev, v, t, step, record_every=1 << 30)
        v, ls = tr.vectors[-1], ls + float(tr.log_scales[-1])
        pts.append((t, (ls + math.log(float(np.linalg.norm(v)))) / t))
        logs.append(ls)
        prev = t
    vals = [val for _, val in pts]
    return LyapunovEstimate(vals[-1], float(horizon), pts, _tail_spread(vals), logs)


@dataclass
class ConvergenceReport:
    passed: bool
    tail_spread: float
    band: float
    summary: str


def convergence_report(est: LyapunovEstimate, band: float) -> ConvergenceReport:
    """Pass iff the estimate moved by at most ``band`` over the last quarter
    of its checkpoints.  A single checkpoint has spread 0 and always passes."""
    if band <= 0:
        raise ValueError("band must be positive")
    ok = est.tail_spread <= band
    summary = (
        f"lambda_hat = {est.lambda_hat:.6g} at horizon {est.horizon:g}; "
        f"tail spread {est.tail_spread:.3g} {'<=' if ok else '>'} band {band:g}"
    )
    return ConvergenceReport(ok, est.tail_spread, band, summary)


def aggregate(values) -> dict:
    """Mean, sample standard deviation and standard error, summed in the
    given order."""
    vals = [float(v) for v in values]
    k = len(vals)
    mean = math.fsum(vals) / k
    std = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (k - 1)) if k > 1 else 0.0
    return {"mean": mean, "std": std, "se": std / math.sqrt(k), "count": k}
