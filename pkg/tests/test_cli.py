import csv
import json

import numpy as np
import pytest

from css_envelope import cli, config


@pytest.fixture
def run(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)

    def _run(*argv):
        return cli.main([str(a) for a in argv])
    return _run


REF = config.bundled("reference")
CX = config.bundled("counterexample")


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_analyze_rt(run, tmp_path, capsys):
    assert run("analyze", REF, "--target", "rt") == 0
    assert "cmd: R = 10000 us" in capsys.readouterr().out
    rows = {r["task_id"]: r for r in read_csv(tmp_path / "css_out/analyze-rt/rt.csv")}
    assert rows["cmd"]["R_us"] == "10000"
    assert rows["cmd"]["oracle_R_us"] == "10000"
    assert rows["cmd"]["C_us"] == "3000" and rows["cmd"]["converged"] == "1"
    man = json.loads((tmp_path / "css_out/analyze-rt/manifest.json").read_text())
    assert list(man["files"]) == ["rt.csv"]


@pytest.mark.parametrize("target", ["envelope", "stability", "entropy"])
def test_analyze_targets_ok(run, tmp_path, target):
    assert run("analyze", REF, "--target", target) == 0
    out = json.loads((tmp_path / f"css_out/analyze-{target}/{target}.json").read_text())
    assert out


def test_counterexample_denied(run, capsys, tmp_path):
    assert run("analyze", CX, "--target", "envelope") == 1
    out = capsys.readouterr().out
    assert "verdict: denied: deadline" in out
    assert "failed: deadline)" in out
    env = json.loads((tmp_path / "css_out/analyze-envelope/envelope.json").read_text())
    assert env["release"]["failed"] == ["deadline"]


def test_usage_errors(run, tmp_path, capsys):
    assert run("sweep", REF, "--axis", "bogus", "--from", 0, "--to", 1, "--steps", 3) == 2
    assert "unknown axis" in capsys.readouterr().err
    assert run("sweep", REF, "--axis", "V_Sigma", "--from", 0, "--to", 1, "--steps", 0) == 2
    assert run("sweep", REF, "--axis", "V_Sigma", "--from", 0, "--to", 1, "--steps", 2,
               "--axis2", "s_w:0:1") == 2
    assert run("simulate", REF, "--epochs", -1) == 2
    assert run("analyze", tmp_path / "missing.toml", "--target", "rt") == 2
    with pytest.raises(SystemExit) as ei:
        cli.main(["analyze", str(REF), "--target", "nope"])
    assert ei.value.code == 2


def test_config_error_exit(run, tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text(REF.read_text().replace("B_bus = 1e6\n", ""))
    assert run("analyze", bad, "--target", "rt") == 2
    assert "bus.B_bus: missing required field" in capsys.readouterr().err
    nosim = tmp_path / "nosim.toml"
    text = REF.read_text()
    nosim.write_text(text[:text.index("[sim]")] + text[text.index("[verify]"):])
    assert run("simulate", nosim) == 2


def test_sweep_v_sigma_monotone(run, tmp_path):
    assert run("sweep", REF, "--axis", "V_Sigma", "--from", 0, "--to", 10, "--steps", 21) == 0
    rows = read_csv(tmp_path / "css_out/sweep/sweep.csv")
    T = np.array([float(r["T_key"]) for r in rows])
    assert np.all(np.diff(T) < 0)
    V = np.array([float(r["V_Sigma"]) for r in rows])
    tv = (T * V)[V >= 5]
    assert tv.max() / tv.min() - 1 < 0.02


def test_sweep_l_kem_single_step(run, tmp_path, capsys):
    assert run("sweep", REF, "--axis", "L_kem", "--from", 0, "--to", 2900, "--steps", 30) == 0
    assert "1 jump(s)" in capsys.readouterr().out
    rows = read_csv(tmp_path / "css_out/sweep/sweep.csv")
    assert "L_kem_bits" in rows[0]
    flags = [r["L_kem_bits"] for r in rows if r["jump_flag"] == "1"]
    assert flags == ["2100.0"]
    R = np.array([int(r["R_us"]) for r in rows])
    steps = np.diff(R)
    # the frame itself grows one tick per bit, so every step is 100 ticks except the jump
    assert np.sum(steps != 100) == 1


def test_sweep_s_w_affine(run, tmp_path, ref_cfg):
    assert run("sweep", REF, "--axis", "s_w", "--from", 0, "--to", 4, "--steps", 9) == 0
    rows = read_csv(tmp_path / "css_out/sweep/sweep.csv")
    s = np.array([float(r["s_w"]) for r in rows])
    mu = np.array([float(r["mu_lat"]) for r in rows])
    c = ref_cfg.stability["certs"]
    assert np.allclose(np.diff(mu) / np.diff(s), -c.alpha2 / c.c1, rtol=1e-9)


def test_sweep_2d(run, tmp_path):
    assert run("sweep", REF, "--axis", "V_Sigma", "--from", 0, "--to", 1, "--steps", 3,
               "--axis2", "s_w:0:2:2") == 0
    rows = read_csv(tmp_path / "css_out/sweep/sweep.csv")
    assert len(rows) == 6 and list(rows[0])[:2] == ["V_Sigma", "s_w"]


def test_simulate_reproducible(run, tmp_path):
    assert run("simulate", REF, "--epochs", 200) == 0
    m1 = (tmp_path / "css_out/simulate/manifest.json").read_bytes()
    s1 = json.loads((tmp_path / "css_out/simulate/summary.json").read_text())
    assert run("simulate", REF, "--epochs", 200) == 0
    assert (tmp_path / "css_out/simulate/manifest.json").read_bytes() == m1
    assert run("simulate", REF, "--epochs", 200, "--seed", 9) == 0
    assert (tmp_path / "css_out/simulate/manifest.json").read_bytes() != m1
    log = (tmp_path / "css_out/simulate/log.jsonl").read_text().splitlines()
    assert len(log) == 200 and s1["epochs"] == 200


def test_simulate_zero_epochs(run, tmp_path):
    assert run("simulate", REF, "--epochs", 0) == 0
    s = json.loads((tmp_path / "css_out/simulate/summary.json").read_text())
    assert s["rates"] is None
    assert (tmp_path / "css_out/simulate/log.jsonl").read_bytes() == b""


def test_verify_bounds(run, tmp_path, capsys):
    assert run("verify-bounds", REF) == 0
    rows = read_csv(tmp_path / "css_out/verify-bounds/verify.csv")
    assert len(rows) >= 10
    assert {r["status"] for r in rows} <= {"pass", "inconclusive"}


def test_fmt():
    assert cli.fmt(True) == "1" and cli.fmt(None) == "" and cli.fmt(0.1) == "0.1"
    assert json.loads(cli.dumps({"x": float("nan"), "y": np.int64(2)})) == {"x": "nan", "y": 2}
