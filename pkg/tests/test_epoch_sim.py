import json
from dataclasses import replace

import numpy as np
import pytest

from css_envelope import config, epoch_sim as S


@pytest.fixture(scope="module")
def sim(ref_cfg):
    return replace(ref_cfg.sim, epochs=1500)


def test_streams_independent():
    a = S.stream(5, S.PLANT).standard_normal(4)
    b = S.stream(5, S.SENSOR).standard_normal(4)
    assert not np.allclose(a, b)
    assert np.array_equal(a, S.stream(5, S.PLANT).standard_normal(4))


def test_canonical_scalars():
    assert S.canonical(None) == "null"
    assert S.canonical(True) == "true"
    assert S.canonical(np.int64(3)) == "3"
    assert S.canonical(0.1) == "0.10000000000000001"
    assert S.canonical(float("nan")) == '"nan"'
    assert S.canonical(-float("inf")) == '"-inf"'
    assert S.canonical('a"b') == '"a\\"b"'
    with pytest.raises(TypeError):
        S.canonical([1])


def test_wilson():
    assert S.wilson(0, 0).hat is None
    r = S.wilson(0, 300)
    assert (r.hat, r.low, r.high) == (0.0, 0.0, 0.01)
    r = S.wilson(300, 300)
    assert r.low == pytest.approx(0.99)
    r = S.wilson(10, 100)
    assert r.low < 0.1 < r.high
    # Wilson score interval by hand
    z = 1.959963984540054
    n, p = 100, 0.1
    c = (p + z * z / (2 * n)) / (1 + z * z / n)
    w = z / (1 + z * z / n) * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    assert r.low == pytest.approx(c - w, rel=1e-9) and r.high == pytest.approx(c + w, rel=1e-9)


def test_noise_free_run_releases_everything(sim):
    res = S.run(replace(sim, noise_scale=0.0, jitter_p=0.0))
    s = res.summary
    assert s["released"] == sim.epochs
    assert s["reasons"] == {}
    assert s["tag_outcomes"] == {"accept": sim.epochs}


def test_tamper_always_rejected(sim):
    res = S.run(replace(sim, attacks=S.AttackConfig(tamper_p=1.0)))
    s = res.summary
    assert s["tag_outcomes"] == {"reject_forge": sim.epochs}
    assert s["released"] == 0
    assert s["rates"]["fail_int_hat"]["count"] == 0


def test_replay_and_spoof_rejected(sim):
    res = S.run(replace(sim, attacks=S.AttackConfig(replay_p=0.3, spoof_p=0.3,
                                                     spoof_offset=(1.0, 1.0, 1.0))))
    att = np.asarray(res.log.col("attack"))
    rel = np.asarray(res.log.col("released"), bool)
    tags = np.asarray(res.log.col("tag"))
    assert (att == "replay").sum() > 100
    assert not rel[att == "replay"].any()
    assert set(tags[att == "replay"]) <= {"reject_replay", "reject_forge"}
    assert res.summary["rates"]["fail_int_hat"]["count"] == 0


def test_rates_and_bounds(sim):
    s = S.run(sim).summary
    r = s["rates"]
    # 1% jitter with a 5 ms excursion pushes R past D roughly once per hundred epochs
    assert r["eps_bus_hat"]["low"] <= 0.01 <= r["eps_bus_hat"]["high"]
    assert r["eps_st_hat"]["count"] == 0 and r["eps_st_hat"]["high"] == pytest.approx(3 / sim.epochs)
    assert r["alarm_hat"]["hat"] <= s["bounds"]["alarm"]
    assert r["fr_hat"]["hat"] <= s["bounds"]["fr"]
    assert s["max_key_age_ratio"] <= 1.0
    assert s["log_ms_slope"] < 0.05


def test_replay_determinism(sim):
    small = replace(sim, epochs=300)
    h = S.replay(small)
    assert S.replay(small) == h
    assert S.replay(small, seed=2) != h
    assert S.replay(replace(small, P0=2e-4)) != h


def test_jsonl_parses(sim):
    log = S.run(replace(sim, epochs=20)).log
    lines = log.to_jsonl().decode().splitlines()
    assert len(lines) == 20
    recs = [json.loads(x) for x in lines]
    assert list(recs[0]) == list(S.FIELDS)
    assert [r["k"] for r in recs] == list(range(20))


def test_zero_epochs(sim):
    res = S.run(replace(sim, epochs=0))
    assert len(res.log) == 0 and res.log.to_jsonl() == b""
    assert res.summary["rates"] is None


def test_counterexample_sim(cx_cfg):
    s = S.run(cx_cfg.sim).summary
    assert s["released"] == 0
    assert s["reasons"] == {"deadline": cx_cfg.sim.epochs}
    assert s["tag_outcomes"] == {"accept": cx_cfg.sim.epochs}


def test_simconfig_validation(sim):
    with pytest.raises(ValueError):
        replace(sim, epochs=-1)
    with pytest.raises(ValueError):
        replace(sim, jitter_p=2.0)
    with pytest.raises(ValueError):
        S.AttackConfig(tamper_p=0.7, replay_p=0.7)
    with pytest.raises(ValueError):
        replace(sim, attacks=S.AttackConfig(spoof_p=0.1))


def test_ablation_timing_reproduces_unsafe_acceptance(cx_cfg):
    res = S.run(replace(cx_cfg.sim, ablate=("timing",)))
    sched = np.asarray(res.log.col("schedulable"), bool)
    assert res.summary["released"] == cx_cfg.sim.epochs
    assert not sched.any()


def test_ablation_tag_admits_tamper(sim):
    att = S.AttackConfig(tamper_p=0.5)
    base = S.run(replace(sim, epochs=600, attacks=att))
    abl = S.run(replace(sim, epochs=600, attacks=att, ablate=("tag",)))
    for res in (base, abl):
        a = np.asarray(res.log.col("attack"))
        assert np.asarray(res.log.col("gate"), bool)[a == "tamper"].mean() > 0.95
    a = np.asarray(abl.log.col("attack"))
    assert np.asarray(abl.log.col("released"), bool)[a == "tamper"].mean() > 0.9
    assert abl.summary["rates"]["fail_int_hat"]["count"] > 0
    a = np.asarray(base.log.col("attack"))
    assert not np.asarray(base.log.col("released"), bool)[a == "tamper"].any()
    assert base.summary["rates"]["fail_int_hat"]["count"] == 0
    with pytest.raises(ValueError):
        replace(sim, ablate=("everything",))


def test_map_noise_moves_surge_margin(sim):
    small = replace(sim, epochs=200)
    quiet = S.run(small)
    lin = replace(small.lin, gamma_pi=1.0)
    noisy = S.run(replace(small, lin=lin, sigma_pi=0.01, sigma_m=0.01))
    dm = noisy.log.array("M_s") - quiet.log.array("M_s")
    assert np.abs(dm).max() > 1e-3
    # other streams are untouched by the extra draws
    assert noisy.log.col("rho") == quiet.log.col("rho")
    assert S.run(replace(small, lin=lin)).hash == S.run(replace(small, lin=lin)).hash
    with pytest.raises(ValueError):
        replace(small, sigma_pi=-1.0)
