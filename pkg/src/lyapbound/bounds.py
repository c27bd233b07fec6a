"""Lower bounds on the top Lyapunov exponent of a cooperative signal.

Each bound is the average, along the driver, of a function of the sampled
matrix.  The average is taken either in time along one realisation
(``time_average_bound``) or against the stationary law of the driver
(``expectation_bound``).

Naming: ``frobenius_row`` uses min_i sum_j a_ij (the minimal row sum) and
``frobenius_col`` uses min_j sum_i a_ij (the minimal column sum), with a_ij
in row i, column j.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch
from .lyapunov import top_exponent_matrix
from .matrix_core import (
    as_array,
    kolotilina_values,
    min_col_sum_values,
    min_row_sum_values,
    pairwise_values,
)
from .propagator import default_step, raw_many, rk4_grid
from .signals import ConstantSignal, MarkovSignal, MatrixSignal, PeriodicSignal, StationaryDistribution

KINDS = ("kolotilina", "frobenius_row", "frobenius_col", "pairwise")


@dataclass(frozen=True)
class Integrand:
    """One bound family; ``evaluate`` takes matrices of shape (..., n, n).

    ``evaluate`` is already normalised (the Kolotilina value is divided by n,
    the pairwise value by 2), so for a constant matrix it equals the static
    bound.  ``rate`` undoes the normalisation and gives the lower bound on
    the growth rate of ln V for the matching Lyapunov function V.
    """

    kind: str
    i: int | None = None
    j: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown integrand kind {self.kind!r}")
        if self.kind == "pairwise" and (self.i is None or self.j is None or self.i == self.j):
            raise IndexError("pairwise integrand needs two distinct indices")

    def evaluate(self, a) -> np.ndarray:
        a = np.asarray(as_array(a), dtype=float)
        if self.kind == "kolotilina":
            return kolotilina_values(a)
        if self.kind == "frobenius_row":
            return min_row_sum_values(a)
        if self.kind == "frobenius_col":
            return min_col_sum_values(a)
        n = a.shape[-1]
        if not (0 <= self.i < n and 0 <= self.j < n):
            raise IndexError(f"pair ({self.i}, {self.j}) out of range for n = {n}")
        return pairwise_values(a, self.i, self.j)

    def degree(self, n: int) -> int:
        return {"kolotilina": n, "pairwise": 2}.get(self.kind, 1)

    def rate(self, a) -> np.ndarray:
        a = np.asarray(as_array(a), dtype=float)
        return self.degree(a.shape[-1]) * self.evaluate(a)

    @property
    def label(self) -> str:
        return f"pairwise({self.i},{self.j})" if self.kind == "pairwise" else self.kind


KOLOTILINA = Integrand("kolotilina")
FROBENIUS_ROW = Integrand("frobenius_row")
FROBENIUS_COL = Integrand("frobenius_col")


def pairwise(i, j) -> Integrand:
    return Integrand("pairwise", i, j)


def all_pairs(n):
    return [pairwise(i, j) for i in range(n) for j in range(i + 1, n)]


# ---------------------------------------------------------------------------
# quadrature


def quadrature(signal: MatrixSignal, t0: float, t1: float, step: float | None = None):
    """Nodes and weights with int_{t0}^{t1} f(A(tau)) dtau ~ sum w_k f(A_k).

    Exact for piecewise-constant signals (one node per mode, weighted by the
    time spent in it); composite Simpson on the RK4 grid otherwise.
    """
    if isinstance(signal, (ConstantSignal, MarkovSignal)):
        mats = np.asarray(signal.mode_matrices)
        w = np.zeros(len(mats))
        for a, b, m in signal.segments(t0, t1):
            w[m] += b - a
        return mats, w
    step = default_step(signal) if step is None else step
    grid = rk4_grid(t0, t1, step)
    h = grid[1] - grid[0]
    mids = grid[:-1] + 0.5 * h
    nodes = raw_many(signal, np.concatenate([grid, mids]))
    w_grid = np.full(len(grid), h / 3.0)
    w_grid[0] = w_grid[-1] = h / 6.0
    w_mid = np.full(len(mids), 2.0 * h / 3.0)
    return nodes, np.concatenate([w_grid, w_mid])


def integrate(signal, integrand: Integrand, t0, t1, step=None) -> float:
    """int_{t0}^{t1} integrand(A(tau)) dtau (normalised integrand)."""
    mats, w = quadrature(signal, t0, t1, step)
    return float(np.dot(w, integrand.evaluate(mats)))


def cumulative_rate_integral(signal, integrand: Integrand, times, step=None) -> np.ndarray:
    """int_{times[0]}^{times[k]} rate(A(tau)) dtau for every k."""
    out = [0.0]
    for a, b in zip(times[:-1], times[1:]):
        mats, w = quadrature(signal, a, b, step)
        out.append(out[-1] + float(np.dot(w, integrand.rate(mats))))
    return np.array(out)


def time_average_bound(signal: MatrixSignal, integrand: Integrand, horizon: float, step: float | None = None) -> float:
    """(1/horizon) int_0^horizon integrand(A(tau)) dtau along one realisation."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    return integrate(signal, integrand, 0.0, horizon, step) / horizon


def expectation_bound(modes, pi, integrand: Integrand) -> float:
    """sum_m pi_m * integrand(A_m)."""
    p = pi.pi if isinstance(pi, StationaryDistribution) else np.asarray(pi, dtype=float)
    if len(modes) != len(p):
        raise DimensionMismatch(f"{len(modes)} modes but distribution of length {len(p)}")
    mats = np.array([as_array(m) for m in modes])
    return float(np.dot(p, integrand.evaluate(mats)))


# ---------------------------------------------------------------------------
# reports


@dataclass
class BoundConfig:
    mode: str = "auto"  # auto | time_average | expectation
    horizon: float | None = None  # time-average horizon; one period by default
    step: float | None = None
    with_lambda: bool = False
    lambda_horizon: float | None = None
    checkpoints: int = 100


@dataclass
class BoundReport:
    values: dict
    pair: tuple | None
    argmin_row: int | None
    argmin_col: int | None
    mode: str
    horizon: float | None = None
    pi: list | None = None
    pairwise_table: dict = field(default_factory=dict)
    lambda_hat: float | None = None

    @property
    def best_kind(self) -> str:
        vals = {k: v for k, v in self.values.items() if v is not None}
        return max(vals, key=vals.get)

    @property
    def best_value(self) -> float:
        return self.values[self.best_kind]

    @property
    def margins(self) -> dict | None:
        if self.lambda_hat is None:
            return None
        return {k: (None if v is None else self.lambda_hat - v) for k, v in self.values.items()}

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "horizon": self.horizon,
            "pi": self.pi,
            "values": dict(self.values),
            "best_kind": self.best_kind,
            "pair": list(self.pair) if self.pair else None,
            "argmin_row": self.argmin_row,
            "argmin_col": self.argmin_col,
            "lambda_hat": self.lambda_hat,
            "margins": self.margins,
        }


def _averager(signal, config):
    mode = config.mode
    if mode == "auto":
        mode = "time_average" if isinstance(signal, PeriodicSignal) else "expectation"
    if mode == "expectation":
        if isinstance(signal, ConstantSignal):
            modes, pi = [signal.a], np.array([1.0])
        elif isinstance(signal, MarkovSignal):
            modes, pi = signal.modes, signal.stationary().pi
        else:
            raise TypeError("expectation mode needs a constant or Markov signal")
        return mode, None, [float(p) for p in pi], lambda f: expectation_bound(modes, pi, f)
    if mode != "time_average":
        raise ValueError(f"unknown mode {mode!r}")
    horizon = config.horizon
    if horizon is None:
        horizon = signal.period if isinstance(signal, PeriodicSignal) else 1.0
    mats, w = quadrature(signal, 0.0, horizon, config.step)
    return mode, horizon, None, lambda f: float(np.dot(w, f.evaluate(mats))) / horizon


def best_bound(signal: MatrixSignal, config: BoundConfig | None = None) -> BoundReport:
    """Evaluate every bound family; the pairwise family is maximised over
    i < j with ties going to the lexicographically first pair."""
    config = config or BoundConfig()
    mode, horizon, pi, avg = _averager(signal, config)
    values = {
        "kolotilina": avg(KOLOTILINA),
        "frobenius_row": avg(FROBENIUS_ROW),
        "frobenius_col": avg(FROBENIUS_COL),
        "pairwise": None,
    }
    table = {}
    pair = None
    for f in all_pairs(signal.n):
        v = avg(f)
        table[(f.i, f.j)] = v
        if values["pairwise"] is None or v > values["pairwise"]:
            values["pairwise"], pair = v, (f.i, f.j)
    argmin_row = argmin_col = None
    if isinstance(signal, ConstantSignal):
        a = signal.a.a
        argmin_row, argmin_col = int(np.argmin(a.sum(axis=1))), int(np.argmin(a.sum(axis=0)))
    report = BoundReport(values, pair, argmin_row, argmin_col, mode, horizon, pi, table)
    if config.with_lambda:
        lh = config.lambda_horizon
        if lh is None:
            lh = 50 * signal.period if isinstance(signal, PeriodicSignal) else 1e4
        report.lambda_hat = top_exponent_matrix(signal, lh, config.step, config.checkpoints).lambda_hat
    return report


def bound_dominance_tolerance(signal: MatrixSignal, se: float = 0.0) -> float:
    """Allowed shortfall of lambda_hat below a bound before it counts as a
    violation."""
    if isinstance(signal, ConstantSignal):
        return 1e-6
    if isinstance(signal, PeriodicSignal):
        return 1e-4
    return 3.0 * se + 1e-2


def trajectory_inequalities(signal: MatrixSignal, trajectory, step=None, slack: float = 1e-6) -> dict:
    """Worst violation of the product and sum growth estimates along a
    trajectory from a positive initial state.

    product: ln prod x_i(t) - ln prod x_i(t0) >= int (trace A + 2 sum_{j<k} sqrt(a_jk a_kj))
    sum:     ln sum x_i(t) - ln sum x_i(t0)   >= int min_j sum_i a_ij

    The sum of coordinates grows at rate sum_j (sum_i a_ij) x_j, so it is
    controlled by the minimal column sum.  The minimal row sum controls it
    along trajectories of the transposed system; pass ``signal.transpose()``
    and a trajectory of it to check that version.

    Returned values are max over recorded times of
    rhs - lhs - slack*(t - t0) - 1e-12 (the constant absorbs round-off in the
    logarithms); both must be <= 0.
    """
    times = trajectory.times
    dt = times - times[0]
    logc = trajectory.log_components()
    lhs_prod = logc.sum(axis=1) - logc[0].sum()
    lhs_sum = trajectory.log_sums() - trajectory.log_sums()[0]
    rhs_prod = cumulative_rate_integral(signal, KOLOTILINA, times, step)
    rhs_sum = cumulative_rate_integral(signal, FROBENIUS_COL, times, step)
    return {
        "product": float(np.max(rhs_prod - lhs_prod - slack * dt - 1e-12)),
        "sum": float(np.max(rhs_sum - lhs_sum - slack * dt - 1e-12)),
    }
