import math

import numpy as np
import pytest

from css_envelope.engine_model import (
    ActuationInputs, ActuatorLimits, CertBox, EngineLinearization, EngineState, ModeMatrices,
    StressGate, StressRegime, TorsionalParams, actuation_window, max_auth_sampling_interval,
    operating_line_displacement, step_plant, stress_gate_check, surge_distance_perturbation,
    surge_margin)

ZERO = np.zeros((8, 8))


def mode(A=ZERO, G=ZERO):
    return ModeMatrices(np.asarray(A, float), np.zeros((8, 2)), np.asarray(G, float))


def test_zero_dynamics_is_identity(rng):
    x = EngineState.from_array(rng.normal(size=8))
    for dt in (1e-3, 0.1, 5.0):
        out = step_plant(x, (0.0, 0.0), mode(), dt, rng.normal(size=8))
        np.testing.assert_array_equal(out.state.as_array(), x.as_array())


def test_stable_diagonal_decay_tracks_exponential():
    x = np.ones(8)
    m = mode(A=-np.eye(8))
    dt, norms = 0.01, [np.linalg.norm(x)]
    for _ in range(1000):
        x = step_plant(x, (0, 0), m, dt, np.zeros(8)).state.as_array()
        norms.append(np.linalg.norm(x))
    norms = np.array(norms)
    assert np.all(np.diff(norms) < 0)
    t = dt * np.arange(1001)
    exact = math.sqrt(8) * np.exp(-t)
    # Euler global error is O(dt) relative to the envelope scale
    assert np.max(np.abs(norms - exact)) <= dt * math.sqrt(8)


def test_noisy_run_is_deterministic():
    def traj(seed):
        rng = np.random.default_rng(seed)
        m = mode(A=-np.eye(8), G=0.1 * np.eye(8))
        x, out = np.zeros(8), []
        for _ in range(200):
            x = step_plant(x, (0.1, 0.0), m, 0.01, rng.normal(size=8)).state.as_array()
            out.append(x)
        return np.array(out)
    np.testing.assert_array_equal(traj(3), traj(3))


def test_saturation_and_box_exit():
    m = ModeMatrices(np.zeros((8, 8)), np.eye(8)[:, :2], np.zeros((8, 8)))
    lim = ActuatorLimits(w_f_min=-1, w_f_max=1)
    box = CertBox(np.full(8, -0.5), np.full(8, 0.5))
    out = step_plant(np.zeros(8), (10.0, 0.0), m, 1.0, np.zeros(8), lim, box)
    assert out.u == (1.0, 0.0)
    assert out.state.N_L == 1.0
    assert not out.in_cert


def test_bad_dt_rejected():
    with pytest.raises(ValueError):
        step_plant(np.zeros(8), (0, 0), mode(), 0.0, np.zeros(8))


def test_operating_line():
    lin = EngineLinearization(b_N=1, b_m=1, b_u=1)
    assert operating_line_displacement(lin, 0, 0, 0) == 0
    assert operating_line_displacement(lin, 0.1, -0.2, 0.05) == pytest.approx(-0.05, abs=1e-15)
    assert operating_line_displacement(lin, 0.2, -0.4, 0.1) == pytest.approx(
        2 * operating_line_displacement(lin, 0.1, -0.2, 0.05))


def test_surge_margin():
    lin = EngineLinearization(M_s0=0.2, gamma_op=1.0, gamma_pi=0.0)
    assert surge_margin(lin, 0.0, 0.0) == 0.2
    assert surge_margin(lin, 0.25) == pytest.approx(-0.05)
    vals = [surge_margin(lin, d) for d in np.linspace(0, 1, 20)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
    assert surge_margin(lin, -0.3) == surge_margin(lin, 0.3)


def test_surge_distance_perturbation():
    lin = EngineLinearization(s_N=0.3, a_piN=0.3, s_m=-0.1, a_pim=-0.1, s_u=0.0)
    assert surge_distance_perturbation(lin, 1.0, 2.0, 3.0, 0.1, 0.1) == pytest.approx(0.0)
    lin = EngineLinearization(s_N=0.5, s_m=-0.3, s_u=0.2)
    assert surge_distance_perturbation(lin, 1, 1, 1, 0, 0) == pytest.approx(0.4)
    a = surge_distance_perturbation(lin, 1, 1, 1, 0.1)
    b = surge_distance_perturbation(lin, 1, 1, 1, 0.2)
    assert surge_distance_perturbation(lin, 1, 1, 1, 0.3) == pytest.approx(a + b - 0.4)


def test_sampling_interval():
    t = TorsionalParams(J_s=1.0, D_s=0.1, Gamma_s=1.0, q_s=4.0)
    assert max_auth_sampling_interval(t) == pytest.approx(math.pi / 2)
    t2 = TorsionalParams(J_s=1.0, D_s=0.1, Gamma_s=2.0, q_s=4.0)
    assert max_auth_sampling_interval(t2) == pytest.approx(math.sqrt(2) * math.pi / 2)
    big = TorsionalParams(J_s=1.0, D_s=0.1, Gamma_s=1.0, q_s=1e12)
    assert max_auth_sampling_interval(big) < 1e-11
    with pytest.raises(ValueError):
        max_auth_sampling_interval(TorsionalParams(1.0, 0.1, 1.0, 2.0))


def test_actuation_window():
    eq = ActuationInputs(1.0, 0.5, 0.0, 0.5, 0.0, 0.5, 0.5, 1.0, 1.0, 1.0)
    assert actuation_window(eq) == pytest.approx(0.5)
    a = ActuationInputs(0.05, 0.01, 0.0, 1e6, 0.0, 1e6, 1e6, 1.0, 1.0, 1.0)
    assert actuation_window(a) == pytest.approx(0.04)
    sat = ActuationInputs(1.0, 0.0, 0.0, 10.0, 2.0, 2.0, 1.0, 1.0, 1.0, 1.0)
    assert actuation_window(sat) <= 0


GATE = StressGate(M_min=0.05, T_t4_max=1800, e_EGT_max=10, Ndot_max=100, w_f_max=2, v_max=5)


def phi(**kw):
    base = dict(M_s=0.2, T_t4=1500, e_EGT=1.0, delta_tc=0.0, Gamma_s=1.0, Ndot_H=10.0,
                w_f=1.0, v_norm=1.0)
    base.update(kw)
    return StressRegime(**base)


def test_stress_gate():
    assert stress_gate_check(phi(), GATE).ok
    res = stress_gate_check(phi(M_s=0.04), GATE)
    assert not res.ok and res.reason == "surge"
    assert [k for k, v in res.checks.items() if not v] == ["surge"]
    assert stress_gate_check(phi(M_s=0.05), GATE).ok
    assert stress_gate_check(phi(v_norm=6), GATE).reason == "vibration"


def test_state_validation():
    with pytest.raises(ValueError):
        EngineState.from_array(np.zeros(7))
