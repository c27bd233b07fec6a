"""Experiment runner and command-line interface.

    lyapbound run CONFIG.json [--out DIR] [--csv] [--jobs N]
    lyapbound gen {static,periodic,switched} --count K --seed S --out DIR
    lyapbound bound MATRIX.json

Exit codes: 0 success, 1 error, 2 an exponent estimate fell below one of the
bounds by more than the tolerance for its signal kind.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .bounds import (
    FROBENIUS_COL,
    FROBENIUS_ROW,
    KINDS,
    KOLOTILINA,
    BoundConfig,
    best_bound,
    bound_dominance_tolerance,
    pairwise,
    time_average_bound,
    trajectory_inequalities,
)
from .errors import ConfigError, LyapboundError, NotML
from .lyapunov import aggregate, top_exponent_matrix
from .matrix_core import (
    best_pairwise_bound_static,
    dominant_eigenvalue,
    frobenius_bounds_static,
    kolotilina_bound_static,
    load_matrix,
    random_ml_matrix,
    validate_ml,
)
from .propagator import default_step, solve_trajectory
from .signals import ConstantSignal, MarkovSignal, PeriodicSignal, signal_from_dict, stationary_distribution

RESULT_NAME = "result.json"


@dataclass
class ExperimentConfig:
    signal: dict
    horizon: float
    step: float | None = None
    checkpoints: int = 100
    replicas: int = 1
    base_seed: int = 0
    bounds: list = field(default_factory=lambda: list(KINDS))
    trajectory_check: bool = False
    output: dict = field(default_factory=lambda: {"json": RESULT_NAME, "csv": False})

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("", "config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        extra = sorted(set(d) - known)
        if extra:
            raise ConfigError(extra[0], "unknown field")
        for req in ("signal", "horizon"):
            if req not in d:
                raise ConfigError(req, "missing required field")
        cfg = cls(**d)
        cfg._validate()
        return cfg

    def _validate(self):
        def positive(name, v, integer=False):
            ok = isinstance(v, int) if integer else isinstance(v, (int, float))
            if isinstance(v, bool) or not ok or not (v > 0 and math.isfinite(v)):
                raise ConfigError(name, f"must be a positive {'integer' if integer else 'number'}, got {v!r}")

        positive("horizon", self.horizon)
        if self.step is not None:
            positive("step", self.step)
        positive("checkpoints", self.checkpoints, integer=True)
        positive("replicas", self.replicas, integer=True)
        if not isinstance(self.base_seed, int) or isinstance(self.base_seed, bool) or self.base_seed < 0:
            raise ConfigError("base_seed", "must be a nonnegative integer")
        if not isinstance(self.bounds, list) or not self.bounds:
            raise ConfigError("bounds", "must be a non-empty list")
        for k, b in enumerate(self.bounds):
            if b not in KINDS:
                raise ConfigError(f"bounds[{k}]", f"unknown bound kind {b!r}")
        if not isinstance(self.output, dict):
            raise ConfigError("output", "must be an object")
        _signal_checked(self.signal)

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _signal_checked(d):
    if not isinstance(d, dict):
        raise ConfigError("signal", "must be an object")
    kind = d.get("kind")
    try:
        if kind in ("constant", "periodic"):
            return signal_from_dict(d)
        if kind == "markov":
            for k, m in enumerate(d.get("modes", [])):
                try:
                    signal_from_dict({"kind": "constant", "matrix": m})
                except NotML as e:
                    raise ConfigError(f"signal.modes[{k}].rows[{e.i}][{e.j}]", f"negative off-diagonal entry {e.value!r}") from e
            sig = signal_from_dict(d)
            stationary_distribution(sig.generator)
            return sig
    except NotML as e:
        where = "signal.matrix" if kind == "constant" else "signal"
        raise ConfigError(f"{where}.rows[{e.i}][{e.j}]", f"negative off-diagonal entry {e.value!r}") from e
    except ConfigError:
        raise
    except (LyapboundError, ValueError, KeyError, TypeError, IndexError) as e:
        raise ConfigError("signal", f"{type(e).__name__}: {e}") from e
    raise ConfigError("signal.kind", f"unknown signal kind {kind!r}")


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError("", f"invalid JSON: {e}") from e
    return ExperimentConfig.from_dict(d)


# ---------------------------------------------------------------------------
# experiment


def _integrands(n, kinds, pair):
    out = {}
    for k in kinds:
        if k == "kolotilina":
            out[k] = KOLOTILINA
        elif k == "frobenius_row":
            out[k] = FROBENIUS_ROW
        elif k == "frobenius_col":
            out[k] = FROBENIUS_COL
        elif k == "pairwise" and pair is not None:
            out[k] = pairwise(*pair)
    return out


def _replica(args):
    cfg_dict, seed, pair = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    sig = signal_from_dict(cfg.signal)
    if isinstance(sig, MarkovSignal):
        sig = sig.with_seed(seed)
    step = cfg.step if cfg.step is not None else default_step(sig)
    est = top_exponent_matrix(sig, cfg.horizon, step, cfg.checkpoints)
    rec = {
        "seed": seed,
        "lambda_hat": est.lambda_hat,
        "tail_spread": est.tail_spread,
        "time_average": {k: time_average_bound(sig, f, cfg.horizon, step) for k, f in _integrands(sig.n, cfg.bounds, pair).items()},
    }
    if cfg.trajectory_check:
        tr = solve_trajectory(sig, 0.0, np.ones(sig.n), cfg.horizon, step, record_every=_record_every(sig, cfg, step))
        rec["trajectory"] = trajectory_inequalities(sig, tr, step)
    csv_rows = [(t, v, ls) for (t, v), ls in zip(est.checkpoints, est.log_scales)]
    return rec, csv_rows


def _record_every(sig, cfg, step):
    if isinstance(sig, PeriodicSignal):
        return max(1, int(cfg.horizon / step) // 1000)
    return 1 if isinstance(sig, ConstantSignal) else 64


def run_experiment(cfg: ExperimentConfig, jobs: int = 1):
    """Run all replicas; returns (result dict, per-replica checkpoint rows)."""
    signal = signal_from_dict(cfg.signal)
    report = best_bound(signal, BoundConfig(step=cfg.step))
    pair = report.pair if "pairwise" in cfg.bounds else None
    seeds = [cfg.base_seed + k for k in range(cfg.replicas)]
    work = [(cfg.to_dict(), s, pair) for s in seeds]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outs = list(ex.map(_replica, work))
    else:
        outs = [_replica(w) for w in work]
    replicas = [o[0] for o in outs]
    lam = aggregate(r["lambda_hat"] for r in replicas)
    tol = bound_dominance_tolerance(signal, lam["se"])

    bounds = {}
    status = "ok"
    for k in cfg.bounds:
        v = report.values[k]
        if v is None:
            bounds[k] = None
            continue
        ok = lam["mean"] >= v - tol
        if not ok:
            status = "violation"
        entry = {"value": v, "margin": lam["mean"] - v, "pass": ok}
        if k == "pairwise":
            entry["pair"] = list(report.pair)
        if k == "frobenius_row" and report.argmin_row is not None:
            entry["argmin"] = report.argmin_row
        if k == "frobenius_col" and report.argmin_col is not None:
            entry["argmin"] = report.argmin_col
        bounds[k] = entry
    if cfg.trajectory_check:
        traj_ok = all(r["trajectory"]["product"] <= 0 and r["trajectory"]["sum"] <= 0 for r in replicas)
        if not traj_ok:
            status = "violation"

    result = {
        "version": __version__,
        "config_hash": cfg.digest(),
        "signal_kind": cfg.signal["kind"],
        "n": signal.n,
        "horizon": cfg.horizon,
        "seeds": seeds,
        "replicas": replicas,
        "lambda": lam,
        "bound_mode": report.mode,
        "pi": report.pi,
        "tolerance": tol,
        "bounds": bounds,
        "best_kind": max((k for k in bounds if bounds[k]), key=lambda k: bounds[k]["value"]),
        "status": status,
    }
    return result, [o[1] for o in outs]


def write_result(result, rows, out_dir, cfg: ExperimentConfig, want_csv=False):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, cfg.output.get("json", RESULT_NAME))
    with open(path, "w", newline="\n") as fh:
        json.dump(result, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if want_csv or cfg.output.get("csv"):
        for seed, rr in zip(result["seeds"], rows):
            with open(os.path.join(out_dir, f"checkpoints_seed{seed}.csv"), "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["t", "running_lambda", "log_scale"])
                for t, v, ls in rr:
                    w.writerow([repr(float(t)), repr(float(v)), repr(float(ls))])
    return path


RESULT_SCHEMA = {
    "type": "object",
    "required": ["version", "config_hash", "signal_kind", "n", "horizon", "seeds", "replicas", "lambda", "bound_mode", "tolerance", "bounds", "best_kind", "status"],
    "properties": {
        "version": {"type": "string"},
        "config_hash": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "signal_kind": {"enum": ["constant", "periodic", "markov"]},
        "n": {"type": "integer", "minimum": 1},
        "horizon": {"type": "number", "exclusiveMinimum": 0},
        "seeds": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
        "replicas": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["seed", "lambda_hat", "tail_spread", "time_average"],
                "properties": {
                    "seed": {"type": "integer"},
                    "lambda_hat": {"type": "number"},
                    "tail_spread": {"type": "number", "minimum": 0},
                    "time_average": {"type": "object", "additionalProperties": {"type": "number"}},
                    "trajectory": {
                        "type": "object",
                        "required": ["product", "sum"],
                        "properties": {"product": {"type": "number"}, "sum": {"type": "number"}},
                    },
                },
            },
        },
        "lambda": {
            "type": "object",
            "required": ["mean", "std", "se", "count"],
            "properties": {
                "mean": {"type": "number"},
                "std": {"type": "number", "minimum": 0},
                "se": {"type": "number", "minimum": 0},
                "count": {"type": "integer", "minimum": 1},
            },
        },
        "bound_mode": {"enum": ["time_average", "expectation"]},
        "pi": {"type": ["array", "null"], "items": {"type": "number", "minimum": 0}},
        "tolerance": {"type": "number", "minimum": 0},
        "bounds": {
            "type": "object",
            "propertyNames": {"enum": list(KINDS)},
            "additionalProperties": {
                "type": ["object", "null"],
                "required": ["value", "margin", "pass"],
                "properties": {
                    "value": {"type": "number"},
                    "margin": {"type": "number"},
                    "pass": {"type": "boolean"},
                    "pair": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
                    "argmin": {"type": "integer"},
                },
            },
        },
        "best_kind": {"enum": list(KINDS)},
        "status": {"enum": ["ok", "violation"]},
    },
}


# ---------------------------------------------------------------------------
# suite generation


def _mat(a):
    a = np.asarray(a)
    return {"n": int(a.shape[0]), "rows": a.tolist()}


def generate_suite(kind: str, count: int, seed: int, out_dir: str) -> list[str]:
    """Write ``count`` random experiment configs of the given kind."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for k in range(count):
        sub = int(rng.integers(2**31))
        if kind == "static":
            n = int(rng.integers(1, 6))
            a = random_ml_matrix(n, sub).a
            cfg = {"signal": {"kind": "constant", "matrix": _mat(a)}, "horizon": 200.0, "step": 1.0, "checkpoints": 20}
        elif kind == "periodic":
            n = int(rng.integers(2, 5))
            base = random_ml_matrix(n, sub, (-2.0, 2.0), (0.5, 2.0)).a
            amp = base * rng.uniform(-1.0, 1.0, size=(n, n))
            np.fill_diagonal(amp, rng.uniform(-2.0, 2.0, size=n))
            period = float(rng.uniform(1.0, 2 * math.pi))
            cfg = {
                "signal": {
                    "kind": "periodic",
                    "period": period,
                    "base": _mat(base),
                    "harmonics": [{"matrix": _mat(amp), "frequency": 1, "phase": float(rng.uniform(0, 2 * math.pi))}],
                },
                "horizon": 50 * period,
                "checkpoints": 50,
            }
        elif kind == "switched":
            m = int(rng.integers(2, 5))
            n = int(rng.integers(2, 5))
            modes = [random_ml_matrix(n, sub + i, (-2.0, 2.0), (0.0, 2.0)).a for i in range(m)]
            q = rng.uniform(0.5, 2.0, size=(m, m))
            np.fill_diagonal(q, 0.0)
            np.fill_diagonal(q, -q.sum(axis=1))
            cfg = {
                "signal": {"kind": "markov", "modes": [_mat(a) for a in modes], "generator": q.tolist(), "initial_mode": 0},
                "horizon": 1e4,
                "step": 1.0,
                "checkpoints": 100,
                "replicas": 16,
                "base_seed": int(rng.integers(2**31)),
            }
        else:
            raise ValueError(f"unknown suite kind {kind!r}")
        ExperimentConfig.from_dict(cfg)
        path = os.path.join(out_dir, f"{kind}_{k:03d}.json")
        with open(path, "w", newline="\n") as fh:
            json.dump(cfg, fh, indent=2, sort_keys=True)
            fh.write("\n")
        paths.append(path)
    return paths


# ---------------------------------------------------------------------------
# commands


def static_bound_table(a) -> list[tuple[str, float, str]]:
    a = validate_ml(a)
    fr = frobenius_bounds_static(a)
    rows = [
        ("d(A)", dominant_eigenvalue(a), ""),
        ("kolotilina", kolotilina_bound_static(a), ""),
        ("min_row_sum", fr.min_row_sum, f"row {fr.argmin_row}"),
        ("min_col_sum", fr.min_col_sum, f"col {fr.argmin_col}"),
    ]
    if a.n >= 2:
        v, i, j = best_pairwise_bound_static(a)
        rows.append(("best_pairwise", v, f"pair ({i}, {j})"))
    return rows


def _cmd_run(args):
    cfg = load_config(args.config)
    out = args.out or os.path.dirname(os.path.abspath(args.config))
    result, rows = run_experiment(cfg, jobs=args.jobs)
    path = write_result(result, rows, out, cfg, want_csv=args.csv)
    lam = result["lambda"]
    print(f"lambda = {lam['mean']:.6f} (std {lam['std']:.2e}, se {lam['se']:.2e}, {lam['count']} replicas)")
    for k, b in result["bounds"].items():
        if b is None:
            print(f"  {k:14s}   n/a")
        else:
            print(f"  {k:14s} {b['value']: .6f}  margin {b['margin']: .3e}  {'ok' if b['pass'] else 'VIOLATION'}")
    print(f"status: {result['status']}  -> {path}")
    return 2 if result["status"] == "violation" else 0


def _cmd_gen(args):
    for p in generate_suite(args.kind, args.count, args.seed, args.out):
        print(p)
    return 0


def _cmd_bound(args):
    a = load_matrix(args.matrix)
    for name, v, note in static_bound_table(a):
        print(f"{name:14s} {v: .10f}  {note}".rstrip())
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="lyapbound", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (default: next to the config)")
    r.add_argument("--csv", action="store_true", help="also write checkpoint CSV files")
    r.add_argument("--jobs", type=int, default=1, help="worker processes for replicas")
    r.set_defaults(func=_cmd_run)

    g = sub.add_parser("gen", help="generate a suite of random configs")
    g.add_argument("kind", choices=["static", "periodic", "switched"])
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_gen)

    b = sub.add_parser("bound", help="static bounds and d(A) for a matrix file")
    b.add_argument("matrix")
    b.set_defaults(func=_cmd_bound)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (LyapboundError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
