import numpy as np
import pytest

from css_envelope import bus_rt, checks, config


def test_random_task_sets_valid(rng):
    for _ in range(50):
        tasks = checks.random_task_set(rng)
        assert tasks[-1].prio == max(t.prio for t in tasks)
        assert len({t.prio for t in tasks}) == len(tasks)
        assert all(t.L >= 1 and t.P > 0 for t in tasks)


def test_run_all_reference(ref_cfg):
    rows = checks.run_all(ref_cfg)
    assert len(rows) == 15
    assert all(r.status == "pass" for r in rows), [r for r in rows if r.status != "pass"]


def test_chi_square_inconclusive_when_bound_vacuous(rng):
    text = config.bundled("reference").read_text().replace("eta0 = 16.0", "eta0 = 2.0")
    row = checks.check_chi_square(config.loads(text), rng, 1000)
    assert row.status == "inconclusive" and row.ok


def test_renewal_inconclusive_without_dependence():
    text = config.bundled("reference").read_text().replace("zeta_Sigma = 8.0", "zeta_Sigma = 0.0")
    row = checks.check_renewal(config.loads(text))
    assert row.status == "inconclusive"


def test_run_all_turns_exceptions_into_error_rows(ref_cfg, monkeypatch):
    def boom(*a, **k):
        raise ArithmeticError("overflow")
    monkeypatch.setattr(checks, "check_capacity", boom)
    rows = {r.name: r for r in checks.run_all(ref_cfg)}
    bad = [r for r in rows.values() if r.status == "error"]
    assert len(bad) == 1 and "overflow" in bad[0].detail and not bad[0].ok


def test_sim_replay_needs_sim():
    text = config.bundled("reference").read_text()
    cfg = config.loads(text[:text.index("[sim]")] + text[text.index("[verify]"):])
    assert checks.check_sim_replay(cfg).status == "inconclusive"
