"""End-to-end acceptance checks.

Each test prints one PASS/FAIL line (visible with or without -s) and then
asserts.  Tolerances and runtime budgets are fixed here, not derived.
"""

import hashlib
import json
import math
import time

import numpy as np
import pytest

from lyapbound.bounds import (
    KOLOTILINA,
    BoundConfig,
    best_bound,
    time_average_bound,
    trajectory_inequalities,
)
from lyapbound.cli import generate_suite, load_config, main, run_experiment
from lyapbound.floquet import floquet_exponent, monodromy
from lyapbound.lyapunov import top_exponent_matrix
from lyapbound.matrix_core import (
    MLMatrix,
    best_pairwise_bound_static,
    dominant_eigenvalue,
    frobenius_bounds_static,
    kolotilina_bound_static,
    random_ml_matrix,
)
from lyapbound.propagator import propagate, solve_trajectory
from lyapbound.signals import ConstantSignal, PeriodicSignal, signal_from_dict

B = np.array([[0.0, 1.0], [1.0, 0.0]])
T = 2 * math.pi


def report(capsys, k, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


def sin_signal():
    return PeriodicSignal(T, func=lambda t: math.sin(t) * np.eye(2) + B)


def autonomous_corpus():
    # same matrix distribution as the static-dominance corpus, n <= 5
    return [random_ml_matrix(1 + k % 5, k) for k in range(50)]


@pytest.fixture(scope="module")
def switched_runs(tmp_path_factory):
    out = tmp_path_factory.mktemp("switched")
    t0 = time.perf_counter()
    runs = []
    for p in generate_suite("switched", 10, 2024, str(out)):
        cfg = load_config(p)
        cfg.trajectory_check = True
        sig = signal_from_dict(cfg.signal)
        runs.append((cfg, sig, best_bound(sig), run_experiment(cfg)[0]))
    return runs, time.perf_counter() - t0


def test_criterion_1_static_dominance(capsys):
    t0 = time.perf_counter()
    worst = math.inf
    for k in range(1000):
        a = random_ml_matrix(1 + k % 8, 10_000 + k)
        d = dominant_eigenvalue(a)
        fb = frobenius_bounds_static(a)
        bounds = [kolotilina_bound_static(a), fb.min_row_sum, fb.min_col_sum]
        if a.n > 1:
            bounds.append(best_pairwise_bound_static(a)[0])
        worst = min(worst, d - max(bounds))
    elapsed = time.perf_counter() - t0
    ok = worst >= -1e-9 and elapsed < 10
    report(capsys, 1, ok, f"min d(A) - bound = {worst:.3e} (>= -1e-9), {elapsed:.2f} s (< 10 s)")
    assert ok


def test_criterion_2_tightness(capsys):
    t0 = time.perf_counter()
    diffs = [abs(dominant_eigenvalue(B) - kolotilina_bound_static(B))]
    for n in range(1, 7):
        diffs.append(abs(dominant_eigenvalue(np.eye(n)) - kolotilina_bound_static(np.eye(n))))
    rng = np.random.default_rng(2)
    for _ in range(100):
        n = int(rng.integers(1, 8))
        a = rng.uniform(0, 5, size=(n, n))
        c = rng.uniform(-5, 5)
        np.fill_diagonal(a, 0.0)
        np.fill_diagonal(a, c - a.sum(axis=1))
        m = MLMatrix(a)
        diffs.append(abs(dominant_eigenvalue(m) - frobenius_bounds_static(m).min_row_sum))
    elapsed = time.perf_counter() - t0
    ok = max(diffs) <= 1e-9 and elapsed < 1
    report(capsys, 2, ok, f"max |d - bound| = {max(diffs):.2e} (<= 1e-9), {elapsed:.2f} s (< 1 s)")
    assert ok


def test_criterion_3_pairwise_improvement(capsys):
    t0 = time.perf_counter()
    a = MLMatrix([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -100.0]])
    pw, i, j = best_pairwise_bound_static(a)
    kol = kolotilina_bound_static(a)
    d = dominant_eigenvalue(a)
    elapsed = time.perf_counter() - t0
    ok = abs(pw - 1.0) <= 1e-12 and abs(d - 1.0) <= 1e-9 and kol <= -32.6 and (i, j) == (0, 1) and elapsed < 1
    report(capsys, 3, ok, f"pairwise{(i, j)} = {pw}, d(A) = {d:.12f}, kolotilina = {kol:.4f}")
    assert ok


def test_criterion_4_autonomous_exponent(capsys):
    t0 = time.perf_counter()
    errs = []
    for a in autonomous_corpus():
        est = top_exponent_matrix(ConstantSignal(a), 200.0, 1.0)
        errs.append(abs(est.lambda_hat - dominant_eigenvalue(a)))
    elapsed = time.perf_counter() - t0
    bad = [k for k, e in enumerate(errs) if e > 1e-3]
    ok = not bad and elapsed < 30
    report(capsys, 4, ok, f"max |lambda_hat - d(A)| = {max(errs):.3e} (<= 1e-3), over band: {bad}, {elapsed:.2f} s (< 30 s)")
    assert ok


def test_criterion_5_periodic(capsys):
    t0 = time.perf_counter()
    sig = sin_signal()
    fl = floquet_exponent(monodromy(sig))
    kol = time_average_bound(sig, KOLOTILINA, T)
    lam = top_exponent_matrix(sig, 50 * T).lambda_hat
    elapsed = time.perf_counter() - t0
    ok = abs(fl - 1) <= 1e-6 and abs(kol - 1) <= 1e-6 and abs(lam - 1) <= 1e-3 and elapsed < 10
    report(capsys, 5, ok, f"floquet {fl:.10f}, kolotilina avg {kol:.12f}, lambda_hat(50T) {lam:.8f}, {elapsed:.2f} s")
    assert ok


def test_criterion_6_switched_dominance(switched_runs, capsys):
    runs, elapsed = switched_runs
    worst_margin = math.inf
    worst_gap = 0.0
    ok = elapsed < 300
    for cfg, sig, rep, res in runs:
        lam, tol = res["lambda"]["mean"], 3 * res["lambda"]["se"] + 1e-2
        assert res["lambda"]["count"] == 16 and cfg.horizon == 1e4
        for kind, v in rep.values.items():
            worst_margin = min(worst_margin, lam - v + tol)
            for r in res["replicas"]:
                worst_gap = max(worst_gap, abs(r["time_average"][kind] - v))
    ok = ok and worst_margin >= 0 and worst_gap <= 0.05
    report(
        capsys,
        6,
        ok,
        f"min (lambda - bound + 3SE + 1e-2) = {worst_margin:.3e} (>= 0), "
        f"max |time avg - expectation| = {worst_gap:.3e} (<= 0.05), {elapsed:.1f} s (< 300 s)",
    )
    assert ok


def test_criterion_7_trajectory_inequalities(switched_runs, capsys):
    worst = -math.inf
    count = 0

    def check(sig, horizon, step, record_every=1):
        nonlocal worst, count
        x0 = np.ones(sig.n)
        for s in (sig, sig.transpose()):
            tr = solve_trajectory(s, 0.0, x0, horizon, step, record_every)
            w = trajectory_inequalities(s, tr, step)
            worst = max(worst, w["product"], w["sum"])
            count += 1

    for a in autonomous_corpus():
        check(ConstantSignal(a), 200.0, 1.0)
    check(sin_signal(), 50 * T, None, 16)
    runs, _ = switched_runs
    for cfg, sig, _, res in runs:
        for r in res["replicas"]:
            worst = max(worst, r["trajectory"]["product"], r["trajectory"]["sum"])
            count += 1
        for seed in res["seeds"]:
            # row-sum form: coordinate sum of the transposed system
            dual = sig.with_seed(seed).transpose()
            tr = solve_trajectory(dual, 0.0, np.ones(sig.n), cfg.horizon, cfg.step, 64)
            worst = max(worst, trajectory_inequalities(dual, tr, cfg.step)["sum"])
            count += 1
    ok = worst <= 0
    report(capsys, 7, ok, f"{count} trajectories, max (rhs - lhs - 1e-6 (t - t0)) = {worst:.3e} (<= 0)")
    assert ok


def test_criterion_8_structural(tmp_path, capsys):
    details = []
    # cocycle
    sw = signal_from_dict(load_config(generate_suite("switched", 1, 5, str(tmp_path / "g"))[0]).signal)
    rng = np.random.default_rng(8)
    cres = 0.0
    for sig, step in ((sw, 1.0), (sin_signal(), None)):
        for s, t in rng.uniform(0, 20, size=(20, 2)):
            whole = propagate(sig, 0.0, s + t, step)
            split = propagate(sig, s, s + t, step) @ propagate(sig, 0.0, s, step)
            diff = whole.m - split.m * math.exp(split.log_scale - whole.log_scale)
            cres = max(cres, np.linalg.norm(diff) / np.linalg.norm(whole.m))
    details.append(f"cocycle {cres:.1e}")
    # nonnegativity
    neg = min(
        min(propagate(ConstantSignal(random_ml_matrix(4, k)), 0.0, 50.0, 1.0).m.min() for k in range(20)),
        propagate(sw, 0.0, 1e3, 1.0).m.min(),
        propagate(sin_signal(), 0.0, 10 * T).m.min(),
    )
    details.append(f"min entry {neg:.1e}")
    # A -> A + I
    shift = 0.0
    for sig, step, h in ((ConstantSignal(random_ml_matrix(3, 1)), 1.0, 200.0), (sin_signal(), None, 10 * T), (sw, 1.0, 1e3)):
        plus = sig.add_scalar(1.0)
        ba, bb = best_bound(sig, BoundConfig(step=step)), best_bound(plus, BoundConfig(step=step))
        for k, v in ba.values.items():
            shift = max(shift, abs(bb.values[k] - v - 1.0))
        la = top_exponent_matrix(sig, h, step).lambda_hat
        lb = top_exponent_matrix(plus, h, step).lambda_hat
        shift = max(shift, abs(lb - la - 1.0))
    details.append(f"shift error {shift:.1e}")
    # CLI determinism
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(load_config(generate_suite("switched", 1, 9, str(tmp_path / "h"))[0]).to_dict() | {"horizon": 2e3, "replicas": 3}))
    digests = []
    for out in ("a", "b"):
        assert main(["run", str(cfg), "--out", str(tmp_path / out)]) in (0, 2)
        digests.append(hashlib.sha256((tmp_path / out / "result.json").read_bytes()).hexdigest())
    same = digests[0] == digests[1]
    details.append(f"rerun hashes {'equal' if same else 'differ'}")
    ok = cres <= 1e-8 and neg >= -1e-12 and shift <= 1e-9 and same
    report(capsys, 8, ok, ", ".join(details))
    assert ok
