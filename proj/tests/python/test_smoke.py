import json
import math
import os
from pathlib import Path

import pytest

import pacfl

CONFIG_DIR = Path(os.environ.get("PACFL_CONFIG_DIR", Path(__file__).resolve().parents[2] / "configs"))


def base_config(tmp_path):
    cfg = json.loads((CONFIG_DIR / "single_sample_linear.json").read_text())
    cfg["output_dir"] = str(tmp_path / "out")
    cfg["scenario"]["attack"]["T"] = 30
    cfg["scenario"]["n_eval"] = 100
    return cfg


def test_formulas():
    assert pacfl.covering_number(2, 2.0, 1.0) == 1024.0
    rhs, ok, _ = pacfl.privacy_upper_bound(2.0, 5, 1.0, 1.0, 1.0, 0.0, 1.0, 1)
    assert rhs == 0.5 and ok
    assert pacfl.sample_lower_bound(0.5, 0.75, 1.0, 2.0) == 8.0
    assert pacfl.not_pac_condition(5.0, 10.0, 0.9)
    assert math.isclose(pacfl.private_pac_sample_size(0.35, 0.75, 1.0, math.exp(-1)), 100.0)


def test_precondition_errors_are_value_errors():
    with pytest.raises(ValueError):
        pacfl.sample_lower_bound(0.5, 0.5, 1.0, 1.0)
    with pytest.raises(pacfl.ConfigError):
        pacfl.normalize_config({"scenario": {"bogus": 1}})


def test_default_config_round_trips():
    cfg = pacfl.default_config()
    assert pacfl.normalize_config(cfg) == cfg


def test_run_trial_is_deterministic(tmp_path):
    cfg = base_config(tmp_path)
    a = pacfl.run_trial(cfg, 3)
    b = pacfl.run_trial(cfg, 3)
    assert a == b
    assert 0.0 <= a["eps_p"] <= 1.0


def test_train_then_attack(tmp_path):
    cfg = base_config(tmp_path)
    rc, _ = pacfl.train(cfg)
    assert rc == 0
    run_dir = cfg["output_dir"]
    cfg["output_dir"] = str(tmp_path / "attack")
    rc, log = pacfl.attack(cfg, run_dir)
    assert rc == 0 and "eps_p" in log
    assert (tmp_path / "attack" / "results.csv").exists()


def test_missing_artifacts(tmp_path):
    with pytest.raises(pacfl.ConfigError):
        pacfl.attack(base_config(tmp_path), tmp_path / "nothing")


def test_verify_and_sweep(tmp_path):
    cfg = base_config(tmp_path)
    cfg["trials"] = 100
    report = pacfl.verify_bound("privacy", cfg)
    assert report["schema"] == "pacfl.bound_report/1"
    assert report["fraction_holding_all"] == 1.0
    cfg["trials"] = 5
    rc, _ = pacfl.sweep(cfg, "sigma", [0.0, 0.2])
    assert rc == 0
    summary = json.loads((tmp_path / "out" / "sweep_summary.json").read_text())
    assert len(summary["points"]) == 2
