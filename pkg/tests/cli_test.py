"""
Tests for the command-line study runner and its table formats.
"""

import io

import pytest

from src import cli
from src.agents.study_agent import ConvergenceAgent, StudyError
from src.cli import CSV_HEADER, format_csv, format_markdown, main, parse_config, run
from src.core.models import ErrorReport, ErrorRow


@pytest.fixture
def report():
    rows = [
        ErrorRow(n=4, h=0.25, sigma_err=1.273, u_err=2.908e-2, asym_err=1.912e-1),
        ErrorRow(n=6, h=1.0 / 6.0, sigma_err=0.8444, u_err=1.911e-2, asym_err=1.2e-1),
    ]
    return ErrorReport(case_id="exp1", degree=1, rows=rows).with_rates()


def test_csv_format(report):
    lines = format_csv(report).splitlines()

    assert lines[0] == CSV_HEADER == "h,sigma_err,sigma_rate,u_err,u_rate,asym_err,asym_rate"
    assert lines[1].startswith("0.25,1.273E+00,1.0,2.908E-02,1.0,")
    assert lines[2].endswith(",8.444E-01,,1.911E-02,,1.200E-01,")
    assert len(lines) == 3


def test_markdown_format(report):
    lines = format_markdown(report).splitlines()

    assert lines[2].startswith("| 1/4 | 1.273E+00 | 1.0 |")
    assert "| 1/6 | 8.444E-01 | -- |" in lines[3]
    assert lines[-1].startswith("| Pred. |")
    assert lines[-1].count("1.0") == 3


def test_parse_config_flags():
    run_config = parse_config(
        ["--experiment", "2", "--degree", "3", "--n", "4,6", "--lambda", "2", "--quad-bump", "1", "--format", "markdown"]
    )

    assert run_config.case_id == "exp2"
    assert run_config.degree == 3
    assert run_config.n_list == [4, 6]
    assert run_config.lam == 2.0
    assert run_config.quadrature_bump == 1
    assert run_config.output_format == "markdown"


@pytest.mark.parametrize(
    "argv",
    [
        ["--bogus"],
        ["--degree", "4"],
        ["--n", "6,4"],
        ["--n", "0"],
        ["--experiment", "3"],
        ["--format", "json"],
        ["--diagonal", "south"],
        ["--mu", "-1"],
    ],
)
def test_invalid_arguments_exit_1(argv, capsys):
    assert main(argv) == 1
    assert "error" in capsys.readouterr().err


def test_single_mesh_run(tmp_path):
    """Test a one-mesh run written to a file: one row, blank rates."""
    out = tmp_path / "table.csv"
    assert main(["--n", "2", "--out", str(out)]) == 0

    lines = out.read_text().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 2
    cells = lines[1].split(",")
    assert cells[0] == "0.5"
    assert cells[2] == cells[4] == cells[6] == ""


def test_run_to_stream():
    stream = io.StringIO()
    assert run(parse_config(["--experiment", "2", "--n", "2,3", "--format", "markdown"]), stream) == 0

    lines = stream.getvalue().splitlines()
    assert lines[2].startswith("| 1/2 |")
    assert lines[3].startswith("| 1/3 |")


def test_solver_failure_exits_2(monkeypatch):
    """Test that a failed study writes the partial table and exits with 2."""

    def fail(self, case, k, n_list, params, diagonal, quadrature_bump):
        partial = ErrorReport(
            case_id=case.case_id,
            degree=k,
            rows=[ErrorRow(n=4, h=0.25, sigma_err=1.0, u_err=0.1, asym_err=0.2)],
            partial=True,
            failure="n=6: Zero pivot in block p",
        ).with_rates()
        raise StudyError("Study stopped at n=6", partial=partial, field="p")

    monkeypatch.setattr(ConvergenceAgent, "convergence_study", fail)
    stream = io.StringIO()

    assert cli.run(parse_config(["--n", "4,6"]), stream) == 2
    assert stream.getvalue().splitlines()[1].startswith("0.25,1.000E+00,,")
