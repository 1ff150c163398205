import json

import numpy as np
import pytest

from css_envelope import config
from css_envelope.config import ConfigError
from css_envelope.checks import check_markov


def ref_text():
    return config.bundled("reference").read_text()


def test_reference_loads(ref_cfg):
    scn = ref_cfg.scenario()
    assert scn.target_task.id == "cmd"
    assert ref_cfg.theta().V_Sigma == 0.1
    assert ref_cfg.sim.epochs == 10000
    assert len(ref_cfg.mode_certs()) == 2


def test_bundled_names():
    assert config.bundled("counterexample").exists()
    with pytest.raises(ConfigError):
        config.bundled("nope")


def test_schema_version():
    with pytest.raises(ConfigError, match="schema_version"):
        config.loads(ref_text().replace("schema_version = 1", "schema_version = 2"))
    with pytest.raises(ConfigError, match="missing"):
        config.loads(ref_text().replace("schema_version = 1", ""))


def test_unknown_key_reports_path_and_line():
    text = ref_text().replace("eta0 = 16.0", "eta0 = 16.0\netaa = 3")
    line = text.splitlines().index("etaa = 3") + 1
    with pytest.raises(ConfigError) as ei:
        config.loads(text)
    assert ei.value.path == "estimator.etaa"
    assert ei.value.line == line
    assert f"line {line}" in str(ei.value)


def test_missing_required_field():
    with pytest.raises(ConfigError, match="bus.B_bus: missing required field"):
        config.loads(ref_text().replace("B_bus = 1e6\n", ""))


def test_wrong_type():
    with pytest.raises(ConfigError, match="expected a number"):
        config.loads(ref_text().replace("eta0 = 16.0", 'eta0 = "x"'))


def test_priority_tie_rejected():
    with pytest.raises(ConfigError):
        config.loads(ref_text().replace("prio = 4", "prio = 3"))


def test_bad_toml_reports_line():
    with pytest.raises(ConfigError) as ei:
        config.loads("schema_version = 1\n[bus\n")
    assert ei.value.line == 2


def test_json_matches_toml(tmp_path, ref_cfg):
    p = tmp_path / "ref.json"
    p.write_text(json.dumps(ref_cfg.raw, indent=1))
    cfg = config.load(p)
    assert cfg.scenario() == ref_cfg.scenario()
    bad = dict(ref_cfg.raw, extra=1)
    p.write_text(json.dumps(bad, indent=1))
    with pytest.raises(ConfigError) as ei:
        config.load(p)
    assert ei.value.path == "extra" and ei.value.line is not None


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        config.load(tmp_path / "absent.toml")


def test_non_spd_mode_gives_error_row():
    text = ref_text().replace("P = [[1.2, 0.0], [0.0, 1.2]]", "P = [[1.0, 0.0], [0.0, -1.0]]")
    cfg = config.loads(text)
    row = check_markov(cfg, np.random.default_rng(0))
    assert row.status == "error"
    assert "stability" in row.detail or "positive" in row.detail


@pytest.mark.parametrize("name", ["reference", "counterexample"])
def test_repo_configs_match_bundled(name):
    from pathlib import Path
    repo = Path(__file__).resolve().parents[1] / "configs" / f"{name}.toml"
    assert repo.read_bytes() == config.bundled(name).read_bytes()
