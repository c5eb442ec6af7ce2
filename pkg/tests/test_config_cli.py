import json

import numpy as np
import pytest

from crossbar_bnn import cli
from crossbar_bnn.config import ConfigError, load_config


def _conf(tmp_path, **d):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(d))
    return p


def test_defaults_resolve():
    cfg = load_config()
    assert list(cfg.sizes) == ["30nm", "40nm", "50nm", "60nm"]
    assert cfg.default_size == "30nm"
    assert cfg.verify.ratio_threshold == 1.3
    assert cfg.size(None).grid[0] == pytest.approx(1.0) and cfg.size(None).grid[-1] == pytest.approx(12.0)


def test_user_file_merges_one_level(tmp_path):
    cfg = load_config(_conf(tmp_path, verify={"v_step": 0.05}, sizes={"30nm": {"device": {"vsw_std": 0.2}}}))
    assert cfg.verify.v_step == 0.05 and cfg.verify.v_start == 1.0
    assert cfg.size("30nm").device.vsw_std == 0.2
    assert cfg.size("30nm").device.g_off_mean == 9.0


def test_precedence_env_then_flags(tmp_path, monkeypatch):
    path = _conf(tmp_path, output_dir="from_file", jobs=1)
    assert load_config(path).output_dir.name == "from_file"
    monkeypatch.setenv("CROSSBAR_BNN_OUT", str(tmp_path / "from_env"))
    monkeypatch.setenv("CROSSBAR_BNN_JOBS", "2")
    cfg = load_config(path)
    assert cfg.output_dir.name == "from_env" and cfg.jobs == 2
    assert load_config(path, {"output_dir": "from_flag"}).output_dir.name == "from_flag"


@pytest.mark.parametrize("bad", [
    {"bogus": 1},
    {"n_solutions": 0},
    {"seed": -1},
    {"sweep_mode": "fast"},
    {"default_size": "90nm"},
    {"verify": {"ratio_threshold": 0.9}},
    {"sizes": {"30nm": {"device": {"g_off_mean": -1}}}},
    {"sizes": {"30nm": {"grid": {"start": 5, "stop": 1, "step": 0.1}}}},
    {"geometry": {"r_segment": -1}},
    {"superposition": {"voltages": [0.1, -0.2]}},
    {"dataset": "does/not/exist.data"},
])
def test_invalid_config_is_rejected(tmp_path, bad):
    with pytest.raises(ConfigError):
        load_config(_conf(tmp_path, **bad))


def test_unreadable_config(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


def test_exit_code_for_config_error(tmp_path, capsys):
    assert cli.main(["train", "--config", str(_conf(tmp_path, n_solutions=0))]) == cli.EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_unknown_size_exit_code(tmp_path):
    assert cli.main(["characterize", "--size", "90nm", "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_sweep_without_solutions_is_an_input_error(tmp_path):
    assert cli.main(["sweep", "--out", str(tmp_path / "empty")]) == cli.EXIT_CONFIG


def test_training_failure_exit_code(tmp_path):
    conf = _conf(tmp_path, n_solutions=1, train={"epochs": 1, "max_restarts": 0,
                                                 "target_train_accuracy": 1.0})
    assert cli.main(["train", "--config", str(conf), "--out", str(tmp_path)]) == cli.EXIT_TRAIN


def test_outputs_embed_command_seed_and_config(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["export-data", "--out", str(out), "--seed", "7"]) == 0
    d = json.loads((out / "data_split.json").read_text())
    assert d["command"] == "export-data" and d["seed"] == 7
    assert d["config"]["output_dir"] == str(out)
    assert len(d["train"]["labels"]) == 148 and len(d["test"]["labels"]) == 30


def test_characterize_outputs(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["characterize", "--out", str(out)]) == 0
    d = out / "characterize" / "30nm"
    names = {"g_on_map.csv", "g_off_map.csv", "effective_vsw_map.csv", "vsw_histogram.csv",
             "conductance_histogram.csv", "summary.json"}
    assert names <= {p.name for p in d.iterdir()}
    s = json.loads((d / "summary.json").read_text())["summary"]
    assert abs(s["switching_voltage"]["mean"] - 2.2) < 0.05
    g_on = np.loadtxt(d / "g_on_map.csv", delimiter=",")
    assert g_on.shape == (15, 15)


def test_different_seed_changes_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["characterize", "--out", str(a), "--seed", "1"]) == 0
    assert cli.main(["characterize", "--out", str(b), "--seed", "2"]) == 0
    ga = (a / "characterize" / "30nm" / "g_on_map.csv").read_bytes()
    gb = (b / "characterize" / "30nm" / "g_on_map.csv").read_bytes()
    assert ga != gb
