import json
import math

import pytest
from pydantic import ValidationError

from analyze_reports import analyze_reports, load_reports
from config.lab_config import (
    PARAMS_MODELS,
    BallParams,
    ExperimentConfig,
    ExperimentEntry,
    ResolutionPresets,
    SolveParams,
    WedgeParams,
)
from run_experiments import TASKS, main, parse_overrides
from src.errors import NoConvergence
from src.export import to_builtin, write_dat
from tasks.reporting import at_most, config_hash, new_report, run_task


# ======================================================================
# Configuration
# ======================================================================

def test_every_experiment_has_a_task():
    assert set(TASKS) == set(PARAMS_MODELS)


def test_default_suite_covers_everything():
    names = [entry.name for entry in ExperimentConfig.default_suite().experiments]
    assert sorted(names) == sorted(PARAMS_MODELS)


def test_presets_and_resolution():
    quick = ExperimentEntry(name="solve").typed_params("quick")
    assert quick.n_s == ResolutionPresets.QUICK["meridian_n_s"]
    assert quick.n_theta == ResolutionPresets.QUICK["meridian_n_theta"]
    fixed = ExperimentEntry(name="wedge").typed_params(96)
    assert fixed.N == 96


@pytest.mark.parametrize("name, params", [
    ("wedge", {"alpha": 4.0}),
    ("wedge", {"unknown": 1}),
    ("cap", {"n": 2}),
    ("solve", {"r_in": 2.0, "r_out": 1.0}),
    ("solve", {"map": "rotation"}),
    ("ball", {"s": -1.0}),
])
def test_invalid_params_rejected(name, params):
    with pytest.raises(ValidationError):
        ExperimentEntry(name=name, params=params)


def test_unknown_experiment_rejected():
    with pytest.raises(ValidationError):
        ExperimentEntry(name="thm3")


def test_config_file_parses():
    raw = {"seed": 3, "resolution": "quick", "experiments": [{"name": "ball", "params": {"n": 4}}]}
    config = ExperimentConfig.model_validate(raw)
    assert config.experiments[0].typed_params().n == 4
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"resolution": "huge"})


def test_parse_overrides():
    assert parse_overrides(["alpha=1.5", "map=example5", "z_list=[1, 2]"]) == {
        "alpha": 1.5, "map": "example5", "z_list": [1, 2],
    }


# ======================================================================
# Reports
# ======================================================================

def test_config_hash_is_canonical():
    assert config_hash({"a": 1, "b": 2.0}) == config_hash({"b": 2.0, "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_criteria_reject_nan():
    report = new_report("ball", {})
    assert not at_most(report, "residual", math.nan, 1.0)
    assert at_most(report, "error", 0.5, 1.0)
    assert report["criteria"][0]["threshold"] == "<= 1"


def test_failed_task_is_recorded(tmp_path):
    def failing(params, report, out_dir, config):
        at_most(report, "before_failure", 0.0, 1.0)
        raise NoConvergence("budget exhausted", 50, 1e-3)

    report = run_task("ball", failing, BallParams(), tmp_path, None)
    assert not report["passed"]
    assert not report["success"]
    assert "NoConvergence" in report["error"]
    assert all(not c["passed"] for c in report["criteria"])
    assert report["criteria"][-1]["name"] == "pipeline_completed"
    saved = json.loads((tmp_path / "ball_report.json").read_text())
    assert saved["passed"] is False


def test_to_builtin_handles_nonfinite():
    import numpy as np

    data = to_builtin({"x": np.float64(1.5), "y": np.array([1, 2]), "z": math.inf, "flag": np.bool_(True)})
    assert data == {"x": 1.5, "y": [1, 2], "z": "inf", "flag": True}


def test_write_dat_header(tmp_path):
    path = write_dat({"alpha": [1.0, 2.0], "lambda1": [3.0, 4.0]}, tmp_path / "sweep.dat")
    lines = path.read_text().splitlines()
    assert lines[0] == "# alpha lambda1"
    assert len(lines) == 3


# ======================================================================
# Command line
# ======================================================================

def test_cli_ball(tmp_path):
    code = main(["ball", "--out", str(tmp_path), "--resolution", "64"])
    assert code == 0
    report = json.loads((tmp_path / "ball" / "ball_report.json").read_text())
    assert report["passed"]
    assert report["params"]["N"] == 64
    assert (tmp_path / "ball" / "ball_n3.csv").exists()
    assert (tmp_path / "ball" / "ball_n3.json").exists()


def test_cli_json_output(tmp_path, capsys):
    code = main(["ball", "--out", str(tmp_path), "--resolution", "64", "--set", "s=2.0", "--json"])
    assert code == 0
    output = json.loads(capsys.readouterr().out)
    assert output["passed"]
    assert output["reports"][0]["params"]["s"] == 2.0


def test_cli_config_file(tmp_path):
    config = {
        "output_dir": str(tmp_path / "results"),
        "resolution": 64,
        "experiments": [{"name": "ball", "params": {"n": 3}}, {"name": "ball", "params": {"n": 4}}],
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    assert main(["all", "--config", str(path)]) == 0
    assert (tmp_path / "results" / "ball_0" / "ball_report.json").exists()
    assert (tmp_path / "results" / "ball_1" / "ball_report.json").exists()
    table = analyze_reports(str(tmp_path / "results"))
    assert len(table) == 2
    assert table["passed"].all()
    assert len(load_reports(str(tmp_path / "results"))) == 2


@pytest.mark.parametrize("args", [
    ["ball", "--resolution", "huge"],
    ["ball", "--resolution", "-4"],
    ["ball", "--set", "n=2"],
    ["ball", "--set", "novalue"],
    ["ball", "--config", "does_not_exist.json"],
])
def test_cli_configuration_errors(tmp_path, args):
    assert main(args + ["--out", str(tmp_path)]) == 2


def test_cli_rejects_unknown_command():
    with pytest.raises(SystemExit):
        main(["thm3"])


def test_wedge_params_defaults():
    params = WedgeParams()
    assert params.order_band == [3.6, 4.4]
    assert SolveParams().gap_tol == pytest.approx(0.01)
