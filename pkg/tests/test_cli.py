"""CLI: exit codes, report schema, determinism, error objects."""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from ulamstab import cli

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


def _invoke(runner, args):
    return runner.invoke(cli.main, args, catch_exceptions=False)


def _json_out(result):
    # stdout holds exactly one JSON document
    return json.loads(result.output)


def test_corpus_list(runner):
    result = _invoke(runner, ["corpus", "list"])
    assert result.exit_code == 0
    lines = [ln for ln in result.output.splitlines() if ln.strip()]
    assert len(lines) == 9


def test_analyze_stable_problem(runner):
    result = _invoke(runner, ["analyze", str(PROBLEMS / "exeq01.json"), "--reproducible"])
    assert result.exit_code == 0
    doc = _json_out(result)
    assert doc["schema"] == "ulamstab-report/1"
    assert doc["report"]["verdict"] == "best_constant"
    assert doc["report"]["case"] == "iii"
    assert doc["report"]["constant"]["B"] == pytest.approx(0.5, rel=1e-4)
    assert doc["tool"]["name"] == "ulamstab" and doc["tool"]["config_hash"]


def test_analyze_unstable_problem(runner):
    result = _invoke(runner, ["analyze", str(PROBLEMS / "exeq02.json"), "--reproducible"])
    assert result.exit_code == 3
    doc = _json_out(result)
    assert doc["report"]["verdict"] == "instability_evidence"
    assert doc["instability"]["growth_ok"] is True


def test_analyze_deterministic_bytes(runner):
    args = ["analyze", str(PROBLEMS / "const-iii.json"), "--fast-path", "--reproducible"]
    first = _invoke(runner, args)
    second = _invoke(runner, args)
    assert first.output == second.output
    assert "wall_time_s" not in _json_out(first)


def test_fast_path_constant_coefficients(runner):
    result = _invoke(runner, ["analyze", str(PROBLEMS / "const-iii.json"), "--fast-path", "--reproducible"])
    assert result.exit_code == 0
    doc = _json_out(result)
    assert doc["report"]["case"] == "iii"
    assert doc["report"]["constant"] == {"B": 0.5, "L": 0.5}


def test_fast_path_rejects_variable_coefficients(runner):
    result = runner.invoke(cli.main, ["analyze", str(PROBLEMS / "exeq01.json"), "--fast-path"])
    assert result.exit_code == 1


def test_missing_rho_is_input_error(runner, tmp_path):
    doc = json.loads((PROBLEMS / "exeq01.json").read_text())
    del doc["rho"]
    path = tmp_path / "norho.json"
    path.write_text(json.dumps(doc))
    result = runner.invoke(cli.main, ["analyze", str(path)])
    assert result.exit_code == 1


def test_schema_violation_is_input_error(runner, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"alpha": "1"}))
    result = runner.invoke(cli.main, ["analyze", str(path)])
    assert result.exit_code == 1


def test_bad_solve_rho_spec(runner):
    result = runner.invoke(cli.main, ["analyze", str(PROBLEMS / "exeq01.json"), "--solve-rho", "t0=0.5"])
    assert result.exit_code == 1


def test_riccati_check(runner):
    result = _invoke(runner, ["riccati-check", str(PROBLEMS / "exeq01.json")])
    assert result.exit_code == 0
    doc = _json_out(result)
    assert doc["ok"] is True
    assert doc["residual_sup"] < 1e-12
    assert doc["coverage"]["full"] is True


def test_empirical_writes_report_and_csv(runner, tmp_path):
    result = _invoke(
        runner,
        [
            "empirical",
            str(PROBLEMS / "exeq01.json"),
            "--trials",
            "2",
            "--seed",
            "7",
            "--reproducible",
            "--out",
            str(tmp_path),
        ],
    )
    assert result.exit_code == 0
    doc = _json_out(result)
    assert doc["experiments"]["extremal"]["ratio"] == pytest.approx(0.5, rel=1e-3)
    assert doc["experiments"]["random"]["max_ratio"] <= 0.5 * 1.02
    assert (tmp_path / "exeq01.report.json").exists()
    csv = (tmp_path / "exeq01.extremal.csv").read_text().splitlines()
    assert csv[0] == "t,value"
    assert len(csv) > 100


def test_empirical_rejects_zero_epsilon(runner):
    result = runner.invoke(cli.main, ["empirical", str(PROBLEMS / "exeq01.json"), "--epsilon", "0"])
    assert result.exit_code == 1
