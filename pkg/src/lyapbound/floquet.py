"""Monodromy matrix and exact top exponent of periodic cooperative systems."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveSpectralRadius, NotML
from .matrix_core import DEFAULT_TOL, MLMatrix, dominant_eigenvalue
from .propagator import default_step, propagate
from .signals import PeriodicSignal

NEG_SLACK = 1e-12


@dataclass
class Monodromy:
    """U(0 -> T) = exp(log_scale) * p."""

    p: np.ndarray
    log_scale: float
    period: float


def monodromy(signal: PeriodicSignal, step: float | None = None) -> Monodromy:
    if not isinstance(signal, PeriodicSignal):
        raise TypeError("monodromy needs a PeriodicSignal")
    step = default_step(signal) if step is None else step
    u = propagate(signal, 0.0, signal.period, step)
    return Monodromy(u.m, u.log_scale, signal.period)


def floquet_exponent(m: Monodromy, tol: float = DEFAULT_TOL) -> float:
    """(log_scale + ln d(P)) / T.

    Entries of P in [-1e-12, 0) are rounding noise from the integrator and are
    set to zero; anything more negative means the signal was not cooperative.
    """
    p = np.array(m.p, dtype=float)
    scale = float(np.abs(p).max())
    bad = np.argwhere(p < -NEG_SLACK * scale)
    if bad.size:
        i, j = (int(k) for k in bad[0])
        raise NotML(i, j, float(p[i, j]))
    p[p < 0] = 0.0
    d = dominant_eigenvalue(MLMatrix(p), tol=tol * scale)
    if not d > tol * scale:
        raise NonPositiveSpectralRadius(f"d(P) = {d!r}; propagation failed")
    return (m.log_scale + math.log(d)) / m.period
