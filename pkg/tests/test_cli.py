import json

import pytest

from specklecut.cli import make_class_specs, parse_run_config, run
from specklecut.energy import duty_cycle_trace, write_trace_csv
from specklecut.errors import SpeckleCutError


def run_config(data=None, epochs=2, side=64, seed=5):
    cfg = {
        "architecture": {"name": "ch3_material", "input_side": side},
        "channel": {"kind": "by_wavelength", "wavelength_nm": 650},
        "augment": {"zoom_range": [0.8, 1.2], "seed": seed},
        "train": {"learning_rate": 0.001, "batch_size": 8, "epochs": epochs,
                  "early_stop_patience": 10, "seed": seed,
                  "loss": "categorical_ce"},
    }
    if data is not None:
        cfg["data"] = str(data)
    return cfg


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli") / "data"
    code = run(["synth", "--classes", "4", "--per-class", "10", "--size", "64",
                "--wavelength", "650", "--seed", "7", "--out", str(root)])
    assert code == 0
    return root


def test_synth_layout_and_determinism(tmp_path, synth_dir):
    files = sorted(p.relative_to(synth_dir)
                   for p in synth_dir.rglob("*.ppm"))
    assert len(files) == 40
    assert (synth_dir / "dataset.json").exists()
    other = tmp_path / "again"
    assert run(["synth", "--classes", "4", "--per-class", "10", "--size", "64",
                "--wavelength", "650", "--seed", "7", "--out", str(other)]) == 0
    for rel in files:
        assert (other / rel).read_bytes() == (synth_dir / rel).read_bytes()
    assert (other / "dataset.json").read_text() == \
        (synth_dir / "dataset.json").read_text()


def test_synth_240_file_contract(tmp_path):
    out = tmp_path / "d240"
    assert run(["synth", "--classes", "4", "--per-class", "60", "--size", "16",
                "--wavelength", "650", "--seed", "7", "--out", str(out)]) == 0
    assert len(list(out.rglob("*.ppm"))) == 240


def test_train_eval_predict_cycle(tmp_path, synth_dir, capsys):
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(run_config()))
    model = tmp_path / "model.spkl"
    code = run(["train", "--data", str(synth_dir), "--config", str(cfg_path),
                "--out", str(model)])
    assert code == 0
    assert model.exists()
    assert (tmp_path / "model.spkl.history.csv").read_text().startswith(
        "epoch,train_loss")

    report = tmp_path / "eval.json"
    assert run(["eval", "--model", str(model), "--data", str(synth_dir),
                "--report", str(report), "--split", "val"]) == 0
    payload = json.loads(report.read_text())
    assert set(payload) >= {"accuracy", "confusion_matrix", "report", "classes"}
    assert payload["classes"] == ["acrylic", "felt", "mdf", "plywood"]

    image = next((synth_dir / "test" / "mdf").glob("*.ppm"))
    capsys.readouterr()
    assert run(["predict", "--model", str(model), "--image", str(image)]) == 0
    line = capsys.readouterr().out.strip()
    assert "probability=" in line and "category=" in line and "tier=" in line


def test_simulate_writes_report_and_power_csv(tmp_path, capsys):
    trace_path = tmp_path / "wood.csv"
    trace_path.write_text(write_trace_csv(
        duty_cycle_trace(750.0, 1.0, 5000, 2167, "wood")))
    report = tmp_path / "energy.json"
    assert run(["simulate", "--trace", str(trace_path),
                "--report", str(report)]) == 0
    payload = json.loads(report.read_text())
    assert abs(payload["savings_percent"] - 56.66) <= 0.01
    assert set(payload) >= {"e_baseline_ws", "e_adaptive_ws",
                            "savings_percent", "avg_power_saved_w"}
    power = (tmp_path / "energy.json.power.csv").read_text()
    assert power.startswith("t,baseline_w,adaptive_w")
    out = capsys.readouterr().out
    assert "56.66" in out


def test_simulate_idempotent_outputs(tmp_path):
    trace_path = tmp_path / "t.csv"
    trace_path.write_text(write_trace_csv(
        duty_cycle_trace(750.0, 1.0, 100, 40, "felt", smoke_samples=(3,))))
    r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
    assert run(["simulate", "--trace", str(trace_path), "--report", str(r1)]) == 0
    assert run(["simulate", "--trace", str(trace_path), "--report", str(r2)]) == 0
    assert r1.read_text() == r2.read_text()


def test_usage_errors_exit_1(capsys):
    assert run([]) == 1
    assert run(["synth", "--classes", "4"]) == 1
    assert run(["notacommand"]) == 1
    assert "usage error" in capsys.readouterr().err


def test_data_errors_exit_2(tmp_path, capsys):
    missing = tmp_path / "nope.spkl"
    assert run(["predict", "--model", str(missing),
                "--image", str(tmp_path / "x.ppm")]) == 2
    bad_trace = tmp_path / "bad.csv"
    bad_trace.write_text("not a trace\n")
    assert run(["simulate", "--trace", str(bad_trace),
                "--report", str(tmp_path / "r.json")]) == 2
    assert "error:" in capsys.readouterr().err


def test_eval_json_floats_rounded(tmp_path, synth_dir):
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(run_config(epochs=1)))
    model = tmp_path / "m.spkl"
    assert run(["train", "--data", str(synth_dir), "--config", str(cfg_path),
                "--out", str(model)]) == 0
    report = tmp_path / "r.json"
    assert run(["eval", "--model", str(model), "--data", str(synth_dir),
                "--report", str(report), "--split", "val"]) == 0
    text = report.read_text()
    # sorted keys and no float printed beyond 6 significant digits
    obj = json.loads(text)
    assert list(obj) == sorted(obj)
    for token in text.replace(",", " ").replace("]", " ").split():
        try:
            val = float(token)
        except ValueError:
            continue
        if "." in token:
            digits = token.replace("-", "").replace(".", "").lstrip("0")
            assert len(digits) <= 7


def test_run_config_rejects_unknown_keys():
    cfg = run_config()
    cfg["typo"] = 1
    with pytest.raises(SpeckleCutError, match="typo"):
        parse_run_config(json.dumps(cfg))
    cfg = run_config()
    cfg["train"]["momentum"] = 0.9
    with pytest.raises(SpeckleCutError, match="momentum"):
        parse_run_config(json.dumps(cfg))


def test_make_class_specs_ramp():
    specs = make_class_specs(8)
    assert len(specs) == 8
    names = [s.class_name for s in specs]
    assert len(set(names)) == 8
    densities = [s.spot_density for s in specs]
    assert densities == sorted(densities)
