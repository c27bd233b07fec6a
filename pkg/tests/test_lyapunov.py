import math

import numpy as np
import pytest

from lyapbound.matrix_core import dominant_eigenvalue, random_ml_matrix
from lyapbound.lyapunov import aggregate, convergence_report, top_exponent_matrix, top_exponent_vector
from lyapbound.signals import ConstantSignal, MarkovSignal, PeriodicSignal

B = np.array([[0.0, 1.0], [1.0, 0.0]])


def sin_signal():
    return PeriodicSignal(2 * math.pi, func=lambda t: math.sin(t) * np.eye(2) + B)


def two_mode():
    modes = [[[-1.0, 2.0], [0.0, -1.0]], [[-1.0, 0.0], [2.0, -1.0]]]
    return MarkovSignal(modes, [[-1.0, 1.0], [1.0, -1.0]], seed=11)


def test_diagonal_constant():
    est = top_exponent_matrix(ConstantSignal(np.diag([-1.0, 2.0])), 100.0, 1.0)
    assert est.lambda_hat == pytest.approx(2.0, abs=1e-6)
    assert len(est.checkpoints) == 100 and est.checkpoints[-1][0] == 100.0


def test_two_by_two_constant():
    est = top_exponent_matrix(ConstantSignal([[1.0, 2.0], [3.0, 4.0]]), 200.0, 1.0)
    assert est.lambda_hat == pytest.approx((5 + math.sqrt(33)) / 2, abs=1e-4)


def test_periodic_closed_form():
    est = top_exponent_matrix(sin_signal(), 50 * 2 * math.pi)
    assert est.lambda_hat == pytest.approx(1.0, abs=1e-4)


def test_vector_estimates():
    sig = ConstantSignal(np.diag([-1.0, 2.0]))
    assert top_exponent_vector(sig, [1.0, 1.0], 100.0, 1.0).lambda_hat == pytest.approx(2.0, abs=1e-6)
    # the growing coordinate takes over even from 1e-8
    est = top_exponent_vector(sig, [1.0, 1e-8], 1e4, 1.0)
    assert est.lambda_hat == pytest.approx(2.0, abs=1e-2)
    with pytest.raises(ValueError):
        top_exponent_vector(sig, [1.0, 0.0], 10.0)


def test_vector_matches_matrix_switched():
    sig = two_mode()
    m = top_exponent_matrix(sig, 1e4, 1.0).lambda_hat
    v = top_exponent_vector(sig, [1.0, 1.0], 1e4, 1.0).lambda_hat
    assert abs(m - v) <= 1e-3


def test_norm_independence():
    for seed in range(5):
        sig = ConstantSignal(random_ml_matrix(4, seed))
        h = 50.0
        fro = top_exponent_matrix(sig, h, 1.0).lambda_hat
        mx = top_exponent_matrix(sig, h, 1.0, norm="max").lambda_hat
        assert abs(fro - mx) <= math.log(4) / h + 1e-9


@pytest.mark.parametrize("c", [-1.0, 1.0])
def test_scale_equivariance(c):
    for sig in (ConstantSignal(random_ml_matrix(3, 2)), sin_signal(), two_mode()):
        step = None if isinstance(sig, PeriodicSignal) else 0.5
        base = top_exponent_matrix(sig, 60.0, step).lambda_hat
        assert top_exponent_matrix(sig.add_scalar(c), 60.0, step).lambda_hat == pytest.approx(base + c, abs=1e-9)


@pytest.mark.parametrize("seed", range(20))
def test_constant_matches_dominant_eigenvalue(seed):
    a = random_ml_matrix(1 + seed % 5, seed)
    h = 1000.0
    est = top_exponent_matrix(ConstantSignal(a), h, 1.0)
    assert abs(est.lambda_hat - dominant_eigenvalue(a)) <= max(1e-4, 10 / h)


@pytest.mark.parametrize("seed", range(10))
def test_constant_gap_is_eigenvector_bias(seed):
    # ||exp(tA)||_F ~ e^{dt} |v| |w| / (w.v) for the Perron vectors of A
    a = random_ml_matrix(2 + seed % 4, seed).a
    w, vr = np.linalg.eig(a)
    w2, vl = np.linalg.eig(a.T)
    v, u = np.abs(vr[:, np.argmax(w.real)].real), np.abs(vl[:, np.argmax(w2.real)].real)
    if np.sort(w.real)[-1] - np.sort(w.real)[-2] < 0.5:
        pytest.skip("spectral gap too small for the asymptotic form at this horizon")
    h = 200.0
    bias = math.log(np.linalg.norm(v) * np.linalg.norm(u) / (u @ v)) / h
    est = top_exponent_matrix(ConstantSignal(a), h, 1.0)
    assert est.lambda_hat - dominant_eigenvalue(a) == pytest.approx(bias, abs=1e-9)


def test_convergence_report():
    est = top_exponent_matrix(ConstantSignal([[1.0, 2.0], [3.0, 4.0]]), 1e4, 1.0)
    assert convergence_report(est, 1e-4).passed
    slow = MarkovSignal([np.diag([1.0, -1.0]), np.diag([-3.0, 2.0])], [[-0.01, 0.01], [0.01, -0.01]], seed=0)
    bad = convergence_report(top_exponent_matrix(slow, 1.0, 0.1), 1e-6)
    assert not bad.passed and "band" in bad.summary
    one = top_exponent_matrix(ConstantSignal(B), 5.0, 1.0, checkpoints=1)
    assert one.tail_spread == 0.0 and convergence_report(one, 1e-12).passed
    with pytest.raises(ValueError):
        convergence_report(one, 0.0)


def test_bad_horizon():
    with pytest.raises(ValueError):
        top_exponent_matrix(ConstantSignal(B), 0.0)


def test_aggregate():
    agg = aggregate([1.0, 2.0, 3.0, 4.0])
    assert agg["mean"] == 2.5 and agg["count"] == 4
    assert agg["std"] == pytest.approx(np.std([1, 2, 3, 4], ddof=1))
    assert agg["se"] == pytest.approx(agg["std"] / 2)
    assert aggregate([5.0])["std"] == 0.0
