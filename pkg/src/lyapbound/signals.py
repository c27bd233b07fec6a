"""Time-parameterised ML-matrix sources t -> A(omega . t).

Three drivers are provided:

* :class:`ConstantSignal` -- a single matrix (the autonomous case);
* :class:`PeriodicSignal` -- a continuous T-periodic matrix function given
  either in closed form or by snapshots on a uniform grid (linearly
  interpolated);
* :class:`MarkovSignal` -- a matrix switched by a continuous-time Markov
  chain; one realisation of the chain is a :class:`JumpPath`.

``shift(s)`` implements the time shift of the driver, so that
``signal.shift(s).sample(t) == signal.sample(s + t)``.
"""

from __future__ import annotations

import bisect
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    AbsorbingMode,
    DimensionError,
    DimensionMismatch,
    InvalidGenerator,
    ReducibleChain,
)
from .matrix_core import MLMatrix, as_array, parse_matrix, validate_ml

DEFAULT_GRID = 1024


class MatrixSignal:
    """Base class.  Subclasses set ``n`` and ``piecewise_constant``."""

    n: int
    piecewise_constant: bool

    def sample(self, t: float) -> MLMatrix:
        return MLMatrix(self.raw(t))

    def raw(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def shift(self, s: float) -> "MatrixSignal":
        raise NotImplementedError

    def add_scalar(self, c: float) -> "MatrixSignal":
        """The signal t -> A(t) + c I."""
        raise NotImplementedError

    def transpose(self) -> "MatrixSignal":
        raise NotImplementedError


class ConstantSignal(MatrixSignal):
    piecewise_constant = True

    def __init__(self, a):
        self.a = validate_ml(a)
        self.n = self.a.n

    def raw(self, t):
        return self.a.a

    def sample(self, t):
        return self.a

    def shift(self, s):
        return self

    def add_scalar(self, c):
        return ConstantSignal(self.a.a + c * np.eye(self.n))

    def transpose(self):
        return ConstantSignal(self.a.a.T)

    @property
    def mode_matrices(self) -> list[np.ndarray]:
        return [self.a.a]

    def segments(self, t0: float, t1: float):
        """Constancy intervals over [t0, t1] as (start, end, mode) triples."""
        return [(t0, t1, 0)] if t1 > t0 else []

    def __eq__(self, other):
        return isinstance(other, ConstantSignal) and self.a == other.a

    def __repr__(self):
        return f"ConstantSignal({self.a.a.tolist()!r})"


class PeriodicSignal(MatrixSignal):
    """Continuous T-periodic ML-matrix function.

    Either ``func`` (closed form, called with unreduced time; it must be
    T-periodic itself) or ``samples`` (snapshots at ``k*T/len(samples)``,
    linearly interpolated) must be given.
    """

    piecewise_constant = False

    def __init__(
        self,
        period: float,
        func: Callable[[float], np.ndarray] | None = None,
        samples: Sequence | np.ndarray | None = None,
        phase: float = 0.0,
        offset: np.ndarray | None = None,
    ):
        if not (period > 0 and math.isfinite(period)):
            raise ValueError(f"period must be positive, got {period!r}")
        if (func is None) == (samples is None):
            raise ValueError("give exactly one of func or samples")
        self.period = float(period)
        self.phase = float(phase)
        self.func = func
        if samples is not None:
            grid = np.array([as_array(validate_ml(m)) for m in samples])
            if grid.ndim != 3 or len(grid) < 1:
                raise DimensionError("samples must be a non-empty list of square matrices")
            grid.flags.writeable = False
            self.samples = grid
            n = grid.shape[1]
        else:
            self.samples = None
            n = np.asarray(func(0.0)).shape[0]
        self.n = n
        self._offset = offset  # scalar identity shift, see add_scalar
        self.description: dict | None = None

    @classmethod
    def from_function(cls, period, func, grid=DEFAULT_GRID):
        """Tabulate ``func`` on a uniform grid instead of calling it."""
        ts = np.arange(grid) * (period / grid)
        return cls(period, samples=[func(t) for t in ts])

    @classmethod
    def harmonic(cls, period, base, terms=()):
        """A(t) = base + sum_k sin(2 pi f_k t / T + phi_k) M_k.

        ``terms`` holds ``(matrix, frequency, phase)`` triples with integer
        frequencies.  The ML property for every t is enforced through the
        sufficient condition base_ij >= sum_k |M_k,ij| off the diagonal.
        """
        base = as_array(validate_ml(base))
        n = base.shape[0]
        mats, freqs, phis = [], [], []
        for m, f, phi in terms:
            m = np.asarray(as_array(m), dtype=float)
            if m.shape != (n, n):
                raise DimensionMismatch(f"harmonic matrix has shape {m.shape}, expected {(n, n)}")
            if int(f) != f:
                raise ValueError("harmonic frequencies must be integers")
            mats.append(m)
            freqs.append(float(f))
            phis.append(float(phi))
        amp = sum((np.abs(m) for m in mats), np.zeros((n, n)))
        off = ~np.eye(n, dtype=bool)
        if np.any(base[off] - amp[off] < 0):
            raise ValueError("harmonic amplitudes exceed the base off-diagonal entries")
        omega = 2.0 * math.pi / period
        mats_a = np.array(mats) if mats else np.zeros((0, n, n))
        freqs_a, phis_a = np.array(freqs), np.array(phis)

        def func(t):
            if not len(mats_a):
                return base
            w = np.sin(omega * freqs_a * t + phis_a)
            return base + np.tensordot(w, mats_a, axes=1)

        sig = cls(period, func=func)
        sig.description = {
            "base": base.tolist(),
            "terms": [(m.tolist(), f, p) for m, f, p in zip(mats, freqs, phis)],
        }
        return sig

    def _clone(self, phase=None, offset=None):
        new = object.__new__(PeriodicSignal)
        new.__dict__.update(self.__dict__)
        if phase is not None:
            new.phase = phase
        if offset is not None:
            new._offset = offset
        return new

    def raw(self, t):
        tt = self.phase + t
        if self.func is not None:
            a = np.asarray(self.func(tt), dtype=float)
        else:
            k = len(self.samples)
            u = (tt % self.period) / self.period * k
            i = int(math.floor(u))
            w = u - i
            i %= k
            a = (1.0 - w) * self.samples[i] + w * self.samples[(i + 1) % k]
        if self._offset is not None:
            a = a + self._offset
        return a

    def sample(self, t):
        # interpolating ML matrices stays ML; checked anyway
        return MLMatrix(self.raw(t))

    def shift(self, s):
        return self._clone(phase=self.phase + s)

    def add_scalar(self, c):
        base = np.zeros((self.n, self.n)) if self._offset is None else self._offset
        return self._clone(offset=base + c * np.eye(self.n))

    def transpose(self):
        if self.samples is not None:
            new = PeriodicSignal(self.period, samples=np.swapaxes(self.samples, 1, 2), phase=self.phase)
        else:
            f = self.func
            new = PeriodicSignal(self.period, func=lambda t: np.asarray(f(t)).T, phase=self.phase)
        if self._offset is not None:
            new._offset = self._offset.T
        return new

    def __repr__(self):
        kind = "func" if self.func is not None else f"{len(self.samples)} samples"
        return f"PeriodicSignal(T={self.period}, {kind}, phase={self.phase})"


# ---------------------------------------------------------------------------
# Markov switching


def validate_generator(q) -> np.ndarray:
    q = np.array(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 1:
        raise InvalidGenerator(f"generator must be square, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise InvalidGenerator("generator has non-finite entries")
    off = ~np.eye(q.shape[0], dtype=bool)
    if np.any(q[off] < 0):
        raise InvalidGenerator("generator has negative off-diagonal rates")
    scale = max(1.0, float(np.abs(q).max()))
    if np.any(np.abs(q.sum(axis=1)) > 1e-12 * scale * q.shape[0]):
        raise InvalidGenerator("generator rows must sum to zero")
    q.flags.writeable = False
    return q


def is_irreducible(q) -> bool:
    """Strong connectivity of the off-diagonal support graph."""
    q = np.asarray(q)
    m = q.shape[0]
    adj = (q > 0) & ~np.eye(m, dtype=bool)

    def reach(adj):
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(adj[u]):
                if v not in seen:
                    seen.add(int(v))
                    stack.append(int(v))
        return len(seen) == m

    return reach(adj) and reach(adj.T)


@dataclass(frozen=True)
class StationaryDistribution:
    pi: np.ndarray

    def __len__(self):
        return len(self.pi)


def stationary_distribution(q) -> StationaryDistribution:
    """Solve pi Q = 0, sum(pi) = 1 for an irreducible generator."""
    q = validate_generator(q)
    m = q.shape[0]
    if not is_irreducible(q):
        raise ReducibleChain("generator support graph is not strongly connected")
    lhs = q.T.copy()
    lhs[-1, :] = 1.0
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    pi = np.linalg.solve(lhs, rhs)
    pi = np.maximum(pi, 0.0)
    pi /= pi.sum()
    pi.flags.writeable = False
    return StationaryDistribution(pi)


class JumpPath:
    """One realisation of the switching chain, extended lazily.

    ``jump_times[0] == 0`` is the start of the path and ``mode_sequence[k]``
    is the mode on ``[jump_times[k], jump_times[k+1])``.  Sojourn times are
    drawn by inverse CDF from numpy's PCG64 generator seeded with ``seed``,
    so the path depends only on ``(seed, initial_mode, Q)``.  Extension
    mutates the object: one path must not be extended from several threads.
    """

    def __init__(self, q, seed: int, initial_mode: int = 0):
        self.q = validate_generator(q)
        m = self.q.shape[0]
        if not 0 <= initial_mode < m:
            raise IndexError(f"initial mode {initial_mode} out of range for {m} modes")
        self.seed = int(seed)
        self.initial_mode = int(initial_mode)
        self.jump_times = [0.0]
        self.mode_sequence = [self.initial_mode]
        self.absorbed = False
        self._rng = np.random.default_rng(self.seed)
        rates = -np.diag(self.q)
        with np.errstate(divide="ignore", invalid="ignore"):
            probs = np.where(rates[:, None] > 0, self.q / rates[:, None], 0.0)
        np.fill_diagonal(probs, 0.0)
        self._rates = rates
        self._cum = np.cumsum(probs, axis=1)
        self._next = None  # time of the pending jump out of the last mode

    @property
    def horizon(self) -> float:
        """Time up to which the path is known."""
        return math.inf if self.absorbed else (self._next if self._next is not None else 0.0)

    def _draw_sojourn(self, mode):
        rate = self._rates[mode]
        if rate <= 0:
            return math.inf
        u = self._rng.random()
        return -math.log1p(-u) / rate

    def extend_to(self, t: float) -> "JumpPath":
        if self._next is None:
            self._next = self.jump_times[-1] + self._draw_sojourn(self.mode_sequence[-1])
        while self._next <= t:
            cur = self.mode_sequence[-1]
            u = self._rng.random()
            cum = self._cum[cur]
            nxt = int(np.searchsorted(cum, u * cum[-1], side="right"))
            nxt = min(nxt, len(cum) - 1)
            if nxt == cur:  # only possible through rounding at the top of cum
                nxt = int(np.flatnonzero(self.q[cur] > 0)[-1])
            self.jump_times.append(self._next)
            self.mode_sequence.append(nxt)
            self._next = self._next + self._draw_sojourn(nxt)
        if math.isinf(self._next) and not self.absorbed:
            self.absorbed = True
            if len(self._rates) > 1:
                warnings.warn(AbsorbingMode(self.mode_sequence[-1]), stacklevel=2)
        return self

    def mode_at(self, t: float) -> int:
        if t < 0:
            raise ValueError("jump paths start at t = 0")
        self.extend_to(t)
        return self.mode_sequence[bisect.bisect_right(self.jump_times, t) - 1]

    def segments(self, t0: float, t1: float) -> list[tuple[float, float, int]]:
        """Constancy intervals covering [t0, t1], split exactly at jumps."""
        if t1 <= t0:
            return []
        self.extend_to(t1)
        times, modes = self.jump_times, self.mode_sequence
        k = bisect.bisect_right(times, t0) - 1
        out = []
        start = t0
        while True:
            end = times[k + 1] if k + 1 < len(times) else math.inf
            if end >= t1:
                out.append((start, t1, modes[k]))
                return out
            out.append((start, end, modes[k]))
            start = end
            k += 1


def sample_jump_path(modes, q, seed: int, initial_mode: int, horizon: float) -> JumpPath:
    """Simulate the chain on [0, horizon].  ``modes`` is only checked for a
    matching count."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    q = validate_generator(q)
    if len(modes) != q.shape[0]:
        raise DimensionMismatch(f"{len(modes)} modes but generator of size {q.shape[0]}")
    return JumpPath(q, seed, initial_mode).extend_to(horizon)


class MarkovSignal(MatrixSignal):
    piecewise_constant = True

    def __init__(self, modes, generator, seed: int = 0, initial_mode: int = 0, path: JumpPath | None = None, offset: float = 0.0):
        mats = [validate_ml(m) for m in modes]
        if not mats:
            raise DimensionError("need at least one mode")
        n = mats[0].n
        if any(m.n != n for m in mats):
            raise DimensionMismatch("all modes must have the same dimension")
        q = validate_generator(generator)
        if q.shape[0] != len(mats):
            raise DimensionMismatch(f"{len(mats)} modes but generator of size {q.shape[0]}")
        self.modes = mats
        self.generator = q
        self.n = n
        self.path = path if path is not None else JumpPath(q, seed, initial_mode)
        self.offset = float(offset)

    @property
    def seed(self):
        return self.path.seed

    @property
    def initial_mode(self):
        return self.path.initial_mode

    @property
    def mode_matrices(self) -> list[np.ndarray]:
        return [m.a for m in self.modes]

    def with_seed(self, seed: int, initial_mode: int | None = None) -> "MarkovSignal":
        im = self.path.initial_mode if initial_mode is None else initial_mode
        return MarkovSignal(self.modes, self.generator, seed=seed, initial_mode=im)

    def mode_at(self, t: float) -> int:
        if t < 0:
            raise ValueError("Markov signals are sampled at t >= 0")
        return self.path.mode_at(self.offset + t)

    def raw(self, t):
        return self.modes[self.mode_at(t)].a

    def sample(self, t):
        return self.modes[self.mode_at(t)]

    def shift(self, s):
        if s < 0:
            raise ValueError("Markov signals can only be shifted forward")
        return MarkovSignal(self.modes, self.generator, path=self.path, offset=self.offset + s)

    def add_scalar(self, c):
        n = self.n
        return MarkovSignal([m.a + c * np.eye(n) for m in self.modes], self.generator, path=self.path, offset=self.offset)

    def transpose(self):
        return MarkovSignal([m.a.T for m in self.modes], self.generator, path=self.path, offset=self.offset)

    def segments(self, t0: float, t1: float):
        if t0 < 0:
            raise ValueError("Markov signals are sampled at t >= 0")
        off = self.offset
        return [(a - off, b - off, m) for a, b, m in self.path.segments(off + t0, off + t1)]

    def stationary(self) -> StationaryDistribution:
        return stationary_distribution(self.generator)


# ---------------------------------------------------------------------------
# JSON description


def signal_from_dict(d: dict) -> MatrixSignal:
    """Build a signal from its JSON description (see README for the schema)."""
    kind = d.get("kind")
    if kind == "constant":
        return ConstantSignal(validate_ml(parse_matrix(d["matrix"])))
    if kind == "periodic":
        period = float(d["period"])
        if "samples" in d:
            return PeriodicSignal(period, samples=[validate_ml(parse_matrix(m)) for m in d["samples"]])
        base = validate_ml(parse_matrix(d["base"]))
        terms = [
            (parse_matrix(t["matrix"]).a, t.get("frequency", 1), t.get("phase", 0.0))
            for t in d.get("harmonics", [])
        ]
        return PeriodicSignal.harmonic(period, base, terms)
    if kind == "markov":
        modes = [validate_ml(parse_matrix(m)) for m in d["modes"]]
        return MarkovSignal(modes, d["generator"], seed=int(d.get("seed", 0)), initial_mode=int(d.get("initial_mode", 0)))
    raise ValueError(f"unknown signal kind {kind!r}")
