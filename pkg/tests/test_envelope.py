import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from css_envelope import envelope as E
from css_envelope.channel_entropy import EntropyLedger
from css_envelope.envelope import EnvelopeInputs, SecurityBudget, Theta


def test_security_bound_values():
    led = EntropyLedger(mu_puf=1e4, kappa=128, kappa_min=128, kappa_target=256)
    assert E.security_bound(Theta(), SecurityBudget(), led) < 1e-300
    led = EntropyLedger(mu_puf=148, kappa=128, kappa_min=128, kappa_target=256)
    b = SecurityBudget(eps_kem=1e-9, eps_aead=1e-9, eps_zk=1e-9, eps_tag=1e-9)
    assert E.security_bound(Theta(), b, led) == pytest.approx(2**-11 + 4e-9, rel=1e-12)


def test_security_bound_delta_derivative():
    led = EntropyLedger(mu_puf=200, ell_vib1=50, kappa=128, kappa_min=128, kappa_target=256)
    th = Theta(delta_tc=0.3)
    h = 1e-5
    f = lambda d: E.security_bound(replace(th, delta_tc=d), SecurityBudget(), led)
    fd = (f(0.3 + h) - f(0.3 - h)) / (2 * h)
    slack = 200 - 50 * 0.3 - 128
    cf = math.log(2) / 4 * 50 * 2 ** (-slack / 2)
    assert fd == pytest.approx(cf, rel=1e-6)
    assert f(-0.3) == f(0.3)


def test_hybrid_bound():
    assert E.hybrid_bound(SecurityBudget()) == 0
    seven = SecurityBudget(*(0.01,) * 4, eps_puf=0.01, eps_bus=0.01, eps_st=0.01)
    assert E.hybrid_bound(seven) == pytest.approx(0.07)
    assert E.hybrid_bound(SecurityBudget(eps_bus=1.0, eps_st=0.5)) == 1.0
    assert E.decomposition_bound(SecurityBudget(eps_fault=0.2, eps_rt=0.1, eps_bus=0.3)) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        SecurityBudget(eps_kem=-1)


GOOD = dict(verify_ok=True, d2=1.0, eta_k=5.0, delta_total=0.01, W_act=0.02, H_key=200,
            kappa_min=128, mu_lat=0.3)


def test_release_predicate():
    assert E.release_predicate(**GOOD).released
    v = E.release_predicate(**{**GOOD, "W_act": 0.005})
    assert not v.released and v.reason == "untimely" and v.label == "denied: untimely"
    v = E.release_predicate(**{**GOOD, "verify_ok": False, "d2": 0.0})
    assert v.reason == "authentication"
    assert E.release_predicate(**{**GOOD, "eta_k": None}).reason == "residual"
    assert E.release_predicate(**GOOD, D_i=0.009).reason == "deadline"
    assert E.release_predicate(**GOOD, D_i=0.01).released
    assert E.release_predicate(**{**GOOD, "mu_lat": 0.0}).reason == "stability"
    assert E.release_predicate(**{**GOOD, "H_key": 127}).reason == "entropy"


@settings(max_examples=300, deadline=None)
@given(st.booleans(), st.floats(0, 10), st.floats(0.1, 10), st.floats(0, 0.1), st.floats(-0.1, 0.1),
       st.floats(0, 300), st.floats(-1, 1))
def test_release_is_conjunction(ok, d2, eta, delta, W, H, mu):
    v = E.release_predicate(ok, d2, eta, delta, W, H, 128.0, mu)
    assert v.released == (ok and d2 <= eta and delta <= W and H >= 128 and mu > 0)
    assert v.released == (not v.failed)


BASE = EnvelopeInputs(B_sec=1e-12, delta_total=0.01, D_i=0.02, W_act=0.03, mu_lat=0.1,
                      d2=1.0, eta_k=5.0, H_key=200.0, kappa_min=128.0)


def test_combined_envelope_generous():
    d = E.combined_envelope(BASE, eps_star=1e-9, eps_bus=1e-4, eps_st=1e-5)
    assert d.feasible and all(m > 0 for m in d.margins.values())
    assert d.advantage <= d.advantage_bound


def test_combined_envelope_strict_stability():
    d = E.combined_envelope(replace(BASE, mu_lat=0.0))
    assert not d.feasible and d.failed() == ("stability",)
    # the other five admit equality
    eq = replace(BASE, B_sec=E.EPS_STAR_DEFAULT, D_i=0.01, W_act=0.01, d2=5.0, H_key=128.0)
    assert E.combined_envelope(eq).feasible


def test_certification_functional(ref_cfg):
    scn = ref_cfg.scenario()
    ev = E.evaluate(scn, ref_cfg.theta())
    cv = E.certification_functional(ev, scn.eps_star)
    assert cv.C_cert == ev.B_sec and cv.certifiable
    late = replace(ev, B_rt=-1e-6)
    assert E.certification_functional(late, scn.eps_star).C_cert == pytest.approx(ev.B_sec + 1)


def test_ray_sweep_timing_fires_first(ref_cfg):
    scn = ref_cfg.scenario()
    th0 = ref_cfg.theta()
    th1 = replace(th0, L_kem=2900.0)
    ray = E.ray_sweep(scn, th0, th1, steps=59)
    assert ray.order[0] == "timing"
    assert ray.C_cert[0] < 1 <= ray.C_cert[-1]


def test_counterexample_variants():
    r = E.counterexample_report(1e-6)
    assert r.release.label == "denied: deadline"
    assert r.decision.failed() == ("deadline",)
    assert r.B_sec < 1e-30 and r.eps_total == 0.0
    assert E.counterexample_report(0.0).release.released
    assert E.counterexample_report(1e-6, extra_deadline=2e-6).release.released
    scn = E.counterexample_scenario()
    ev = E.evaluate(scn, Theta(M_s=0.2))
    assert ev.rt.R == pytest.approx(scn.target_task.D + 1e-6, abs=1e-12)


def test_regimes_on_reference(ref_cfg):
    scn = ref_cfg.scenario()
    ctx = ref_cfg.regime_context(scn)
    th = ref_cfg.theta()
    assert ctx.jump_points == (2100.0,)
    lab = lambda t: E.regime_classify(E.evaluate(scn, t), ctx)
    assert lab(th) == "R0"
    assert lab(replace(th, V_Sigma=10.0)) == "R1"
    assert lab(replace(th, L_kem=2000.0)) == "R2"
    assert lab(replace(th, M_s=0.06, s_w=4.0)) == "R3"
    assert lab(replace(th, V_Sigma=5.0)) == "mixed"


def test_r1_needs_uncapped_period(ref_cfg):
    scn = replace(ref_cfg.scenario(), T_max=0.5)
    ctx = ref_cfg.regime_context()
    ev = E.evaluate(scn, replace(ref_cfg.theta(), V_Sigma=10.0))
    assert ev.renewal.capped
    assert E.regime_classify(ev, ctx) != "R1"


def test_sensitivities_flat_region(ref_cfg):
    scn = ref_cfg.scenario()
    rows = {r.parameter: r for r in E.sensitivity_table(scn, ref_cfg.theta())}
    assert rows["V_Sigma"].closed_form > 0
    for r in rows.values():
        assert not r.at_jump and r.rel_err < 1e-5
    c = scn.certs
    assert rows["L_kem"].closed_form == pytest.approx(-c.alpha1 / (c.c1 * scn.B_bus))


def test_sensitivity_at_jump(ref_cfg):
    scn = ref_cfg.scenario()
    th = replace(ref_cfg.theta(), L_kem=2050.0)
    row = next(r for r in E.sensitivity_table(scn, th, {"L_kem": 100.0}) if r.parameter == "L_kem")
    assert row.at_jump
    ev0 = E.evaluate(scn, replace(th, L_kem=1950.0))
    ev1 = E.evaluate(scn, replace(th, L_kem=2150.0))
    hp = {t.id: t.L / scn.B_bus for t in scn.tasks}
    extra = sum((ev1.rt.interference_counts[k] - ev0.rt.interference_counts[k]) * hp[k]
                for k in ev0.rt.interference_counts)
    assert extra > 0
    c = scn.certs
    # one of the two one-sided differences carries the jump on top of the slope
    jump_part = (row.left + row.right) * 100.0 - 200.0 * row.closed_form
    assert jump_part == pytest.approx(-extra * c.alpha1 / c.c1, rel=1e-9)
    assert min(row.left, row.right) < row.closed_form


def test_report_roundtrip(ref_cfg):
    scn = ref_cfg.scenario()
    rep = E.report(scn, ref_cfg.theta(), ref_cfg.regime_context(scn), sensitivities=True)
    d = rep.to_dict()
    assert d["release"]["verdict"] == "released" and d["regime"] == "R0"
    assert d["details"]["binding"] == "deadline"
    assert len(d["sensitivities"]) == 3


def test_sweep_serial_equals_parallel(ref_cfg):
    scn = ref_cfg.scenario()
    ctx = ref_cfg.regime_context(scn)
    vals = np.linspace(0, 2900, 30)
    a = E.sweep(scn, ref_cfg.theta(), "L_kem", vals, ctx=ctx, workers=1)
    b = E.sweep(scn, ref_cfg.theta(), "L_kem", vals, ctx=ctx, workers=3)
    assert a == b
    assert [r["L_kem"] for r in a if r["jump"]] == [2100.0]


def test_sweep_2d_order_and_axes(ref_cfg):
    scn = ref_cfg.scenario()
    rows = E.sweep(scn, ref_cfg.theta(), "V_Sigma", [0, 1, 2], "s_w", [0, 1], workers=1)
    assert [(r["V_Sigma"], r["s_w"]) for r in rows] == [(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (2, 1)]
    with pytest.raises(KeyError):
        E.sweep(scn, ref_cfg.theta(), "nope", [0])


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("CSS_ENVELOPE_THREADS", "4")
    assert E.worker_count() == 4
    monkeypatch.setenv("CSS_ENVELOPE_THREADS", "junk")
    assert E.worker_count() == 1


def test_theta_validation():
    with pytest.raises(ValueError):
        Theta(L_kem=-1)
