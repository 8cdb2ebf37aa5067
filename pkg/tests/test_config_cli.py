import json

import numpy as np
import pytest

from nilspec.cli import UsageError, main, parse_gamma, parse_space
from nilspec.config import (ConfigError, apply_overrides, config_hash, default_config,
                            load_config, parse_config_text)
from nilspec.reports import dumps, summarize

INI = """
[run]
suites = clifford, projection
seed = 3

[group.A]
l = 3
a = 1
b = 1

[tol]
identities = 2e-5

[spectrum]
gammas = e1; e1+e2
"""


def test_parse_ini():
    cfg = parse_config_text(INI)
    assert cfg.suites == ("clifford", "projection")
    assert cfg.seed == 3
    assert [g.name for g in cfg.groups] == ["A"]
    assert cfg.tolerances["identities"] == 2e-5
    assert cfg.spectrum["gammas"] == ["e1", "e1+e2"]


def test_parse_json_equivalent():
    doc = {"run": {"suites": ["clifford", "projection"], "seed": 3},
           "group.A": {"l": 3, "a": 1, "b": 1}, "tol": {"identities": 2e-5},
           "spectrum": {"gammas": ["e1", "e1+e2"]}}
    assert config_hash(parse_config_text(json.dumps(doc), "json")) == config_hash(parse_config_text(INI))


def test_empty_x_space_rejected():
    with pytest.raises(ConfigError, match="a \\+ b = 0"):
        parse_config_text("[group.bad]\nl = 3\na = 0\nb = 0\n")


@pytest.mark.parametrize("text,match", [
    ("[run]\nseed = x\n", "line 2"),
    ("[tol]\nbogus = 1\n", "unknown tolerance"),
    ("[nope]\n", "unknown section"),
    ("[run]\nsuites = clifford, wat\n", "unknown suite"),
    ("[group.g]\nl = 3\na = 1\n", "missing field"),
])
def test_config_diagnostics(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config_text(text)


def test_json_syntax_error():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("{bad", "json")


def test_hash_tracks_content():
    a = default_config()
    assert config_hash(a) == config_hash(default_config())
    assert config_hash(apply_overrides(a, seed=1)) != config_hash(a)
    b = apply_overrides(a, tol_overrides=["spectrum=1e-8"])
    assert b.tolerances["spectrum"] == 1e-8 and config_hash(b) != config_hash(a)
    with pytest.raises(ConfigError):
        apply_overrides(a, tol_overrides=["spectrum"])


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.ini")


def test_parse_space_and_gamma():
    cfg = default_config()
    s = parse_space("H(2,0,3)", cfg)
    assert (s.k, s.l) == (8, 3)
    assert not parse_space("H(1,1,3)[eps=0.02,seed=42]", cfg).h_type
    assert not parse_space("P113", cfg).h_type
    with pytest.raises(UsageError):
        parse_space("G(1,1,3)", cfg)
    rng = np.random.default_rng(0)
    assert parse_gamma("e1+e2", 3, rng).tolist() == [1.0, 1.0, 0.0]
    assert parse_gamma("0.5,1,-2", 3, rng).tolist() == [0.5, 1.0, -2.0]
    with pytest.raises(UsageError):
        parse_gamma("e4", 3, rng)


def test_reports_serialization():
    assert dumps({"b": 1 + 2j, "a": np.float64(0.1), "c": (np.int64(2), float("inf"))}) == \
        '{"a": 0.1, "b": [1.0, 2.0], "c": [2, "inf"]}'
    s = summarize([{"check": "x", "residual": 1.0, "verdict": True},
                   {"check": "x", "residual": 3.0, "verdict": False}])
    assert s["x"] == {"n": 2, "n_fail": 1, "max_residual": 3.0, "median_residual": 2.0, "verdict": False}


def test_cli_verify_writes_reports(tmp_path):
    assert main(["verify", "--suite", "clifford", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["verdict"] and rep["suite"] == "clifford"
    rows = (tmp_path / "rows.jsonl").read_text().splitlines()
    assert all(json.loads(r)["config_hash"] == rep["config_hash"] for r in rows)


def test_cli_failure_exit_code(tmp_path):
    # an impossible tolerance turns a passing check into a failure
    code = main(["spectrum", "compare", "--gamma", "e1", "--level", "2", "--out", str(tmp_path),
                 "--tol-override", "spectrum=-1"])
    assert code == 1


def test_cli_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[group.bad]\nl = 3\na = 0\nb = 0\n")
    assert main(["verify", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "a + b = 0" in capsys.readouterr().err
    assert main(["verify", "--suite", "nope", "--out", str(tmp_path / "o")]) == 2


def test_cli_invalid_comparison(tmp_path):
    code = main(["spectrum", "compare", "--pair", "H(1,0,1):H(2,0,1)", "--gamma", "e1",
                 "--level", "2", "--out", str(tmp_path)])
    assert code == 2


def test_cli_usage_error():
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2


def test_cli_spectrum_box_csv(tmp_path):
    assert main(["spectrum", "box", "--space", "H(1,1,3)", "--gamma", "e1", "--gamma", "e1+e2",
                 "--level", "2", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "spectrum.csv").read_text().splitlines()
    assert lines[0] == "gamma_index,block,eigenvalue,multiplicity"
    assert {ln.split(",")[0] for ln in lines[1:]} == {"0", "1"}


def test_cli_group_build(tmp_path):
    assert main(["group", "build", "--out", str(tmp_path)]) == 0
    docs = json.loads((tmp_path / "groups.json").read_text())
    assert [d["group"] for d in docs] == ["H113", "P113"]
