import json
from unittest.mock import patch

import pytest

from ssga_lab.core.custom_types import CommandResult, CommandResultStatus
from ssga_lab.harness.cli import cli_main, render
from ssga_lab.harness.commands import Lab


@pytest.fixture
def lab():
    """Lab with every command registered"""
    return Lab()


def test_lab_registry(lab):
    """Test every subcommand is registered"""
    assert lab.available_commands == [
        "simulate-ga", "campaign", "mc-chain", "analyze-chain", "leading-constants",
        "optimize-c", "figures", "drift", "validate",
    ]


def test_get_command_unknown(lab):
    """Test an unknown command name lists the available ones"""
    with pytest.raises(ValueError, match="Command 'nope' not found. Available commands: simulate-ga"):
        lab.get_command("nope")


def test_execute_catches_errors(lab):
    """Test exceptions inside a command become FAILED results"""
    with patch("ssga_lab.harness.commands.figure_data", side_effect=RuntimeError("solver broke")):
        result = lab.get_command("figures").execute(mu_min=5, mu_max=9, figure=2, seed=0, workers=1)
    assert result.status == CommandResultStatus.FAILED
    assert "solver broke" in result.feedback_message


def test_execute_flags_invalid_arguments(lab):
    """Test model validation errors and inconsistent arguments become INVALID results"""
    result = lab.get_command("figures").execute(mu_min=9, mu_max=5, figure=2, seed=0, workers=1)
    assert result.status == CommandResultStatus.INVALID
    assert "empty range" in result.feedback_message
    result = lab.get_command("analyze-chain").execute(mu=2, j=1, n=10, c=1.0, seed=0, workers=1)
    assert result.status == CommandResultStatus.INVALID


def test_render_csv_and_json():
    """Test CSV rows with column order, empty cells and booleans"""
    result = CommandResult(
        command="x", status=CommandResultStatus.DONE, feedback_message="ok",
        rows=[{"a": 1, "b": None, "c": True}], columns=["c", "a", "b"],
    )
    assert render(result, "csv") == "c,a,b\ntrue,1,\n"
    document = json.loads(render(result, "json"))
    assert document["schema_version"] == 1
    assert document["rows"] == [{"a": 1, "b": None, "c": True}]


def test_figures_csv(capsys):
    """Test figure 2 prints one row per mu under a mu,constant header"""
    assert cli_main(["figures", "--mu-min", "5", "--mu-max", "50"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "mu,constant"
    assert len(lines) == 47
    assert all(1 < float(line.split(",")[1]) < 1.96 for line in lines[1:])


def test_output_is_byte_identical(tmp_path):
    """Test repeated runs with the same seed write identical files"""
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["mc-chain", "--mu", "5", "--j", "50", "--n", "100", "--replicates", "200", "--seed", "4"]
    assert cli_main(args + ["--out", str(first)]) == 0
    assert cli_main(args + ["--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    assert first.read_text().startswith("mu,j,n,c,start_state,mean,std_error,replicates,analytic\n")


def test_analyze_chain_json(capsys):
    """Test the JSON document of a mu=3 chain"""
    assert cli_main(["analyze-chain", "--mu", "3", "--j", "500", "--n", "1000"]) == 0
    document = json.loads(capsys.readouterr().out)
    assert document["schema_version"] == 1
    assert document["command"] == "analyze-chain"
    assert document["status"] == "done"
    assert document["info"]["xi2"] == pytest.approx(5 / 9, abs=1e-12)
    assert [row["state"] for row in document["rows"]] == [0, 1]
    assert document["info"]["diagnostics"]["monotone_premise"] is False


def test_leading_constants_requires_all_probabilities(capsys):
    """Test a partial (p0, p1, p2) triple is rejected with exit status 2"""
    assert cli_main(["leading-constants", "--mus", "5", "--p0", "0.5"]) == 2
    assert "p0, p1 and p2" in capsys.readouterr().err


def test_optimize_c_csv(capsys):
    """Test one row per mode for a single mu"""
    assert cli_main(["optimize-c", "--mus", "5"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "mu,c_star,gamma_star,mode"
    assert [line.split(",")[3] for line in lines[1:]] == ["count_all", "skip_clones"]


def test_simulate_ga_json(capsys):
    """Test a single GA run reports both counters"""
    assert cli_main(["simulate-ga", "--n", "30", "--mu", "3", "--seed", "2", "--format", "json"]) == 0
    (row,) = json.loads(capsys.readouterr().out)["rows"]
    assert row["success"] is True
    assert row["evaluations_skip_clones"] <= row["evaluations_count_all"]


def test_invalid_arguments_exit_2():
    """Test argparse errors map to exit status 2"""
    assert cli_main(["mc-chain", "--mu", "5", "--j", "1", "--n", "10", "--replicates", "0"]) == 2
    assert cli_main(["figures", "--bogus"]) == 2
    assert cli_main(["figures", "--figure", "3"]) == 2
    assert cli_main([]) == 2


@pytest.mark.parametrize("argv", [
    ["simulate-ga", "--n", "10", "--mu", "2"],
    ["simulate-ga", "--n", "10", "--c", "-1"],
    ["analyze-chain", "--mu", "2", "--j", "1", "--n", "10"],
    ["analyze-chain", "--mu", "5", "--j", "10", "--n", "10"],
    ["analyze-chain", "--mu", "5", "--j", "1", "--n", "10", "--c", "0"],
    ["mc-chain", "--mu", "5", "--j", "1", "--n", "10", "--start-state", "3"],
    ["figures", "--mu-min", "4"],
])
def test_invalid_values_exit_2(argv, capsys):
    """Test values rejected by the models exit with status 2 and a message on stderr"""
    assert cli_main(argv) == 2
    assert "Invalid arguments" in capsys.readouterr().err


def test_budget_exhaustion_is_not_an_error(capsys):
    """Test a run that spends its budget still exits 0 and reports success=false"""
    assert cli_main(["simulate-ga", "--n", "200", "--mu", "5", "--max-evaluations", "10"]) == 0
    (row,) = json.loads(capsys.readouterr().out)["rows"]
    assert row["success"] is False
    assert row["evaluations_count_all"] == 10


@pytest.mark.parametrize("variable, value", [
    ("SSGA_LAB_WORKERS", "many"),
    ("SSGA_LAB_WORKERS", "0"),
    ("SSGA_LAB_LOG_LEVEL", "LOUD"),
])
def test_bad_environment_values_exit_2(monkeypatch, variable, value):
    """Test malformed environment defaults are argument errors"""
    monkeypatch.setenv(variable, value)
    assert cli_main(["figures", "--mu-max", "6"]) == 2


def test_workers_from_environment(monkeypatch, lab):
    """Test the worker count falls back to the environment"""
    from ssga_lab.harness.cli import build_parser

    monkeypatch.setenv("SSGA_LAB_WORKERS", "3")
    args = build_parser(lab).parse_args(["figures"])
    assert args.workers == 3
    args = build_parser(lab).parse_args(["figures", "--workers", "2"])
    assert args.workers == 2


def test_validate_fast(capsys):
    """Test the analytic suite passes and reports claims separately"""
    assert cli_main(["validate"]) == 0
    rows = json.loads(capsys.readouterr().out)["rows"]
    kinds = {row["kind"] for row in rows}
    assert kinds == {"invariant", "claim"}
    assert all(row["passed"] for row in rows if row["kind"] == "invariant")
