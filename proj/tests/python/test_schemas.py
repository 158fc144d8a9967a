import json
from pathlib import Path

import pytest

import pacfl

from test_smoke import CONFIG_DIR, base_config

jsonschema = pytest.importorskip("jsonschema")

SCHEMA_DIR = Path(__file__).resolve().parents[2] / "docs" / "schemas"


def check(name, instance):
    schema = json.loads((SCHEMA_DIR / f"{name}.v1.schema.json").read_text())
    jsonschema.validate(instance, schema)


def lines(path):
    return [json.loads(l) for l in path.read_text().splitlines() if l.strip()]


def test_train_and_attack_outputs_match_schemas(tmp_path):
    cfg = base_config(tmp_path)
    assert pacfl.train(cfg)[0] == 0
    run = Path(cfg["output_dir"])
    assert pacfl.attack(cfg, str(run))[0] == 0
    for rec in lines(run / "rounds.jsonl"):
        check("round", rec)
    for rec in lines(run / "attack_trace.jsonl"):
        check("attack_trace", rec)
    check("run_meta", json.loads((run / "run_meta.json").read_text()))
    check("phase2", json.loads((run / "phase2.json").read_text()))


def test_verify_sweep_and_constants_match_schemas(tmp_path):
    cfg = json.loads((CONFIG_DIR / "bound_validity.json").read_text())
    cfg["trials"] = 100
    cfg["output_dir"] = str(tmp_path / "verify")
    assert pacfl.verify(cfg, "privacy")[0] == 0
    check("bound_report", json.loads((tmp_path / "verify" / "bound_report.json").read_text()))

    cfg["output_dir"] = str(tmp_path / "constants")
    assert pacfl.estimate_constants(cfg)[0] == 0
    check("constants", json.loads((tmp_path / "constants" / "constants.json").read_text()))

    cfg = base_config(tmp_path)
    cfg["trials"] = 5
    assert pacfl.sweep(cfg, "sigma", [0.0, 0.5])[0] == 0
    check("sweep_summary", json.loads((tmp_path / "out" / "sweep_summary.json").read_text()))
