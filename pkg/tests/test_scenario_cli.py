import json
import shutil
from pathlib import Path

import pytest

from floquet_harris.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, EXIT_VERDICT, main
from floquet_harris.scenario import (
    ConfigError,
    build_model,
    emit_plots,
    output_dir,
    parse_config,
    parse_dict,
    run,
)

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

SMALL_FLOQUET = {
    "name": "small_floquet",
    "model": {"type": "growth_fragmentation", "period": 1.0, "g0": {"mean": 1.0, "sin_amp": 0.3},
              "b1": {"mean": 1.0}, "kappa": {"kind": "uniform_binary"}},
    "grid": {"x_min": 0.0, "x_max": 8.0, "n_nodes": 80},
    "scheme": {"method": "heun", "dt_max": 1.0},
    "experiment": {"type": "floquet", "n_samples": 3},
}


def write(tmp_path, data, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=2))
    return path


def test_defaults_are_filled_in():
    cfg = parse_dict(SMALL_FLOQUET)
    assert cfg.model["g1"] == {"mean": 0.0, "sin_amp": 0.0, "sin_phase": 0.0}
    assert cfg.experiment["agreement_tol"] == 5e-3
    assert cfg.scheme["method"] == "heun"
    assert cfg.model_type == "growth_fragmentation" and cfg.experiment_type == "floquet"


def test_round_trip_and_digest():
    cfg = parse_dict(SMALL_FLOQUET)
    again = parse_dict(cfg.to_dict())
    assert again == cfg
    assert again.digest() == cfg.digest()
    other = json.loads(json.dumps(SMALL_FLOQUET))
    other["grid"]["n_nodes"] = 81
    assert parse_dict(other).digest() != cfg.digest()


def test_positivity_floor_error_names_the_floor(tmp_path):
    bad = json.loads(json.dumps(SMALL_FLOQUET))
    bad["model"]["g0"] = {"mean": 0.2, "sin_amp": 0.5}
    with pytest.raises(ConfigError) as exc:
        parse_config(write(tmp_path, bad))
    text = str(exc.value)
    assert "g0 positivity floor" in text
    assert "line 6" in text


def test_every_problem_is_reported(tmp_path):
    bad = json.loads(json.dumps(SMALL_FLOQUET))
    bad["grid"]["n_nodes"] = -3
    bad["scheme"]["method"] = "rk9"
    bad["experiment"]["bogus"] = 1
    with pytest.raises(ConfigError) as exc:
        parse_config(write(tmp_path, bad))
    problems = exc.value.problems
    assert len(problems) >= 3
    assert any("bogus" in p and "unknown key" in p for p in problems)
    assert any("n_nodes" in p for p in problems)
    assert any("method" in p for p in problems)


def test_invalid_json_reports_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "name": "x",\n  "model": \n}')
    with pytest.raises(ConfigError, match="line 4"):
        parse_config(path)


def test_incompatible_experiment_is_rejected():
    bad = json.loads(json.dumps(SMALL_FLOQUET))
    bad["experiment"] = {"type": "counterexample_b4"}
    with pytest.raises(ConfigError):
        parse_dict(bad)


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.json")), ids=lambda p: p.stem)
def test_catalog_parses(path):
    cfg = parse_config(path)
    build_model(cfg.model, cfg.grid)


def test_run_writes_artifacts(tmp_path):
    cfg = parse_dict(SMALL_FLOQUET)
    report = run(cfg, tmp_path)
    out = output_dir(cfg, tmp_path)
    assert report.passed
    for name in ("config.json", "report.json", "lambda.csv", "h_family.csv"):
        assert (out / name).exists()
    saved = json.loads((out / "report.json").read_text())
    assert saved["pass"] is True
    assert parse_dict(json.loads((out / "config.json").read_text())) == cfg


def test_csv_output_is_deterministic(tmp_path):
    cfg = parse_dict(SMALL_FLOQUET)
    run(cfg, tmp_path / "a")
    run(cfg, tmp_path / "b")
    a, b = output_dir(cfg, tmp_path / "a"), output_dir(cfg, tmp_path / "b")
    csvs = sorted(p.name for p in a.glob("*.csv"))
    assert csvs
    for name in csvs:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_exit_codes(tmp_path):
    good = write(tmp_path, SMALL_FLOQUET, "good.json")
    assert main(["run", str(good), "--out", str(tmp_path / "runs"), "--quiet"]) == EXIT_OK

    wrong = json.loads(json.dumps(SMALL_FLOQUET))
    wrong["experiment"]["expected_lambda"] = 2.0
    path = write(tmp_path, wrong, "wrong.json")
    assert main(["run", str(path), "--out", str(tmp_path / "runs"), "--quiet"]) == EXIT_VERDICT

    broken = json.loads(json.dumps(SMALL_FLOQUET))
    broken["grid"]["n_nodes"] = 0
    path = write(tmp_path, broken, "broken.json")
    assert main(["run", str(path), "--quiet"]) == EXIT_CONFIG
    assert main(["validate", str(path)]) == EXIT_CONFIG
    assert main(["validate", str(good), "--quiet"]) == EXIT_OK

    uneven = json.loads((SCENARIOS / "gf_convergence.json").read_text())
    uneven["experiment"]["n_checkpoints"] = 7
    path = write(tmp_path, uneven, "uneven.json")
    assert main(["run", str(path), "--out", str(tmp_path / "runs"), "--quiet"]) == EXIT_NUMERIC


def test_batch_returns_worst_code(tmp_path):
    d = tmp_path / "batch"
    d.mkdir()
    write(d, SMALL_FLOQUET, "a.json")
    wrong = json.loads(json.dumps(SMALL_FLOQUET))
    wrong["experiment"]["expected_lambda"] = 2.0
    wrong["name"] = "wrong"
    write(d, wrong, "b.json")
    assert main(["batch", str(d), "--out", str(tmp_path / "runs"), "--quiet"]) == EXIT_VERDICT
    assert main(["batch", str(tmp_path / "empty"), "--quiet"]) == EXIT_CONFIG


def test_plots(tmp_path, capsys):
    cfg = parse_dict(SMALL_FLOQUET)
    run(cfg, tmp_path)
    report = output_dir(cfg, tmp_path) / "report.json"
    assert main(["plots", str(report)]) == EXIT_OK
    assert (report.parent / "h_family.gp").exists()
    assert "h_family.gp" in capsys.readouterr().out


def test_plots_warn_when_nothing_to_plot(tmp_path):
    report = tmp_path / "report.json"
    report.write_text(json.dumps({"outputs": {"config": "config.json"}}))
    with pytest.warns(UserWarning, match="no plottable"):
        assert emit_plots(report) == []


def test_plots_fail_on_missing_csv(tmp_path):
    cfg = parse_dict(SMALL_FLOQUET)
    run(cfg, tmp_path)
    out = output_dir(cfg, tmp_path)
    (out / "lambda.csv").unlink()
    assert main(["plots", str(out / "report.json"), "--quiet"]) == EXIT_CONFIG
    shutil.rmtree(out)
