import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from css_envelope.estimator import (
    Innovation, KalmanModel, KalmanState, OutsideAnalyticSet, ResidualGateInputs,
    chi_square_tail_bound, kf_step, residual_gate, surge_coupled_threshold)


def grid_chernoff(eta, d_y, step=1e-5):
    """Independent oracle: minimise the Chernoff expression on a theta grid."""
    th = np.arange(step, 0.5, step)
    vals = np.exp(-th * eta) * (1 - 2 * th) ** (-d_y / 2)
    return min(1.0, float(vals.min()))


def test_kf_zero_innovation():
    n = 3
    m = KalmanModel(np.eye(n), np.eye(n), np.zeros((n, n)), np.eye(n))
    s = KalmanState(np.array([1.0, 2.0, 3.0]), np.zeros((n, n)))
    _, inn = kf_step(m, s, None, np.array([1.0, 2.0, 3.0]))
    np.testing.assert_array_equal(inn.r, 0)
    assert inn.d2 == 0


def test_kf_scalar_innovation_covariance():
    one = np.eye(1)
    m = KalmanModel(one, one, np.zeros((1, 1)), one)
    _, inn = kf_step(m, KalmanState(np.zeros(1), one), None, np.array([0.5]))
    assert inn.S[0, 0] == pytest.approx(2.0)
    assert inn.d2 == pytest.approx(0.125)


def test_kf_trace_identity(rng):
    for _ in range(50):
        n, p = rng.integers(2, 6), rng.integers(1, 4)
        def spd(k):
            M = rng.normal(size=(k, k))
            return M @ M.T + 0.1 * np.eye(k)
        A, H = rng.normal(size=(n, n)), rng.normal(size=(p, n))
        m = KalmanModel(A, H, spd(n), spd(p))
        st0 = KalmanState(rng.normal(size=n), spd(n))
        new, inn = kf_step(m, st0, None, rng.normal(size=p))
        P_pred = A @ st0.P @ A.T + m.Q
        assert np.trace(inn.S) == pytest.approx(np.trace(H @ P_pred @ H.T + m.R), abs=1e-12 * max(1, np.trace(inn.S)))
        np.testing.assert_allclose(new.P, new.P.T, atol=0)
        assert np.linalg.eigvalsh(new.P).min() > 0


def test_kf_input_and_validation():
    one = np.eye(1)
    m = KalmanModel(one, one, np.zeros((1, 1)), one, B=np.array([[2.0]]))
    new, inn = kf_step(m, KalmanState(np.zeros(1), np.zeros((1, 1))), [1.0], np.array([2.0]))
    assert inn.r[0] == pytest.approx(0.0)
    with pytest.raises(ValueError):
        KalmanModel(one, one, np.zeros((1, 1)), np.zeros((1, 1)))
    with pytest.raises(ValueError):
        KalmanModel(np.eye(2), one, np.zeros((2, 2)), one)


def test_chi_square_bound_values():
    assert chi_square_tail_bound(2.0, 3) == 1.0
    assert chi_square_tail_bound(3.0, 3) == 1.0
    assert chi_square_tail_bound(10.0, 2) == pytest.approx(5 * math.exp(-4), rel=1e-12)
    assert chi_square_tail_bound(10.0, 2) == pytest.approx(0.09158, abs=1e-5)
    with pytest.raises(ValueError):
        chi_square_tail_bound(0.0, 1)


@pytest.mark.parametrize("d_y", [1, 2, 3, 7, 12])
@pytest.mark.parametrize("mult", [1.2, 2.0, 5.0, 9.0])
def test_chi_square_against_grid(d_y, mult):
    eta = mult * d_y
    assert chi_square_tail_bound(eta, d_y) == pytest.approx(grid_chernoff(eta, d_y), rel=1e-6)


def test_chi_square_dominates_exact_tail():
    from scipy.stats import chi2
    for d_y in (1, 2, 7):
        for eta in (d_y + 1, 5 * d_y, 20 * d_y):
            assert chi_square_tail_bound(eta, d_y) >= chi2.sf(eta, d_y)


def test_surge_threshold():
    assert surge_coupled_threshold(9.0, 0.0, 0.3) == 9.0
    assert surge_coupled_threshold(9.0, 1.0, 1.0) == 4.5
    e0, b, M, h = 9.0, 1.0, 0.4, 1e-5
    fd = (surge_coupled_threshold(e0, b, M + h) - surge_coupled_threshold(e0, b, M - h)) / (2 * h)
    cf = e0 * b / (M**2 * (1 + b / M) ** 2)
    assert fd == pytest.approx(cf, rel=1e-6)
    with pytest.raises(OutsideAnalyticSet):
        surge_coupled_threshold(9.0, 1.0, 0.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 5), st.floats(0.01, 5), st.floats(0, 3))
def test_surge_threshold_increasing(M1, M2, beta):
    lo, hi = sorted((M1, M2))
    assert surge_coupled_threshold(9.0, beta, lo) <= surge_coupled_threshold(9.0, beta, hi)


def inn(d2):
    return Innovation(np.zeros(1), np.eye(1), d2)


def test_residual_gate():
    assert residual_gate(ResidualGateInputs(inn(0.0), 1.0, e_EGT_max=1, e_EPR=1, e_RA=1)).ok
    res = residual_gate(ResidualGateInputs(inn(0.0), 1.0, ra_ins_gap=2.0, e_RA=1.0))
    assert not res.ok and res.reason == "radar-altimeter integrity event"
    assert residual_gate(ResidualGateInputs(inn(3.0), 3.0)).ok
    assert residual_gate(ResidualGateInputs(None, 3.0, d2=3.0 + 1e-12)).reason == "innovation"
    with pytest.raises(ValueError):
        ResidualGateInputs(None, 3.0)
