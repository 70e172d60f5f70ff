import json

import pandas as pd

from main import main


def write_config(tmp_path, **extra):
    doc = {
        "env": {"preset": "coin_toss"},
        "training": {"stages": 2, "delta": 10, "theta": 0.05, "mc_samples": 4, "seed": 1},
        "eval": {"grid": {"p_head": [0.5, 0.7]}},
        "runs": 1,
        "out": str(tmp_path / "runs"),
    }
    doc.update(extra)
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(doc))
    return path


def test_solve_prints_the_policy(capsys):
    assert main(["solve", "--preset", "coin_toss", "--inner", "cvar", "--alpha", "0.5"]) == 0
    out = capsys.readouterr().out
    assert "Oracle policy: coin_toss" in out
    assert "Stationary-weighted value" in out


def test_train_then_eval(tmp_path, capsys):
    config = write_config(tmp_path)
    assert main(["train", "--config", str(config)]) == 0
    checkpoint = tmp_path / "runs" / "run_000" / "checkpoint.json"
    assert checkpoint.exists()

    eval_dir = tmp_path / "eval"
    assert main(["eval", "--config", str(config), "--checkpoint", str(checkpoint), "--out", str(eval_dir)]) == 0
    frame = pd.read_csv(eval_dir / "robustness_eval.csv")
    assert list(frame.columns) == ["p_head=0.5", "p_head=0.7", "worst"]
    assert "Robustness sweep" in capsys.readouterr().out


def test_overrides_apply(tmp_path):
    config = write_config(tmp_path)
    out = tmp_path / "elsewhere"
    assert main(["train", "--config", str(config), "--runs", "2", "--seed", "9", "--out", str(out)]) == 0
    assert (out / "run_001" / "stages.csv").exists()
    log = json.loads((out / "run_000" / "training_log.json").read_text())
    assert log["config"]["seed"] != 1


def test_bad_config_exits_with_two(tmp_path, capsys):
    config = write_config(tmp_path, risk={"inner": {"kind": "cvar"}})
    assert main(["train", "--config", str(config)]) == 2
    assert "SchemaViolation" in capsys.readouterr().out


def test_bounds(tmp_path, capsys):
    params = tmp_path / "bounds.json"
    params.write_text(json.dumps({"alpha1": 0.5, "alpha2": 0.5, "delta_total": 4.0}))
    assert main(["bounds", "--params", str(params)]) == 0
    out = capsys.readouterr().out
    assert "stage_iteration_bound" in out
    assert "109" in out


def test_bounds_rejects_bad_discount(tmp_path):
    params = tmp_path / "bounds.json"
    params.write_text(json.dumps({"gamma": 1.0}))
    assert main(["bounds", "--params", str(params)]) == 2


def test_bounds_with_broken_json(tmp_path, capsys):
    params = tmp_path / "bounds.json"
    params.write_text('{"gamma": 0.9,\n "theta": }')
    assert main(["bounds", "--params", str(params)]) == 2
    assert "ParseError" in capsys.readouterr().out


def test_bounds_with_missing_file(tmp_path, capsys):
    assert main(["bounds", "--params", str(tmp_path / "absent.json")]) == 2
    assert "ParseError" in capsys.readouterr().out


def test_eval_rejects_a_malformed_grid(tmp_path, capsys):
    checkpoint = str(tmp_path / "checkpoint.json")
    assert main(["eval", "--checkpoint", checkpoint, "--grid", "{p_head: [0.5]}"]) == 2
    assert "ParseError" in capsys.readouterr().out
    assert main(["eval", "--checkpoint", checkpoint, "--grid", '{"demand": [0.5]}']) == 2
    assert "SchemaViolation" in capsys.readouterr().out


def test_eval_rejects_a_grid_for_another_preset(tmp_path, capsys):
    config = write_config(tmp_path)
    assert main(["train", "--config", str(config)]) == 0
    checkpoint = tmp_path / "runs" / "run_000" / "checkpoint.json"
    assert main(["eval", "--config", str(config), "--checkpoint", str(checkpoint), "--grid", '{"tilt": [1.0]}']) == 2
    assert "SchemaViolation" in capsys.readouterr().out
