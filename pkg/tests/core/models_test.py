"""
Tests for report models and convergence rates.
"""

import math

import pytest
from pydantic import ValidationError

from src.core.config import config
from src.core.models import ErrorReport, ErrorRow, StudyRequest, convergence_rate


def row(n, sigma, u=None, asym=None):
    return ErrorRow(n=n, h=1.0 / n, sigma_err=sigma, u_err=u or sigma, asym_err=asym or sigma)


def test_rate_non_dyadic():
    """Test the rate between n = 4 and n = 6."""
    rate = convergence_rate(1.273, 0.8444, 1 / 4, 1 / 6)

    assert rate == pytest.approx(math.log(1.273 / 0.8444) / math.log(1.5))
    assert f"{rate:.1f}" == "1.0"


def test_rate_identical_errors():
    assert convergence_rate(0.3, 0.3, 0.25, 0.125) == 0.0


def test_with_rates():
    """Test that every row but the last gets a rate."""
    report = ErrorReport(
        case_id="exp1",
        degree=2,
        rows=[row(4, 1.0), row(8, 0.25), row(16, 0.0625)],
    ).with_rates()

    assert report.rows[0].sigma_rate == pytest.approx(2.0)
    assert report.rows[1].u_rate == pytest.approx(2.0)
    assert report.rows[-1].sigma_rate is None
    assert report.rates("sigma_err") == pytest.approx([2.0, 2.0])


def test_single_row_has_no_rates():
    report = ErrorReport(case_id="exp1", degree=1, rows=[row(4, 1.0)]).with_rates()

    assert report.rows[0].asym_rate is None
    assert report.rates("asym_err") == []


def test_rows_must_refine():
    with pytest.raises(ValidationError):
        ErrorReport(case_id="exp1", degree=1, rows=[row(6, 1.0), row(4, 0.5)])


@pytest.mark.parametrize("bad", [float("nan"), -1.0, float("inf")])
def test_error_row_rejects(bad):
    with pytest.raises(ValidationError):
        ErrorRow(n=4, h=0.25, sigma_err=bad, u_err=0.1, asym_err=0.1)


def test_study_request_defaults_and_alias():
    request = StudyRequest(**{"lambda": 2.0})

    assert request.lam == 2.0
    assert request.case_id == "exp1"
    assert request.diagonal == "north-east"


@pytest.mark.parametrize(
    "overrides",
    [
        {"case_id": "exp9"},
        {"degree": 5},
        {"n_list": []},
        {"n_list": [6, 4]},
        {"diagonal": "south"},
    ],
)
def test_study_request_rejects(overrides):
    with pytest.raises(ValidationError):
        StudyRequest(**overrides)


def test_study_request_reads_environment_defaults(monkeypatch):
    """Test that unset request fields come from the environment-driven config."""
    monkeypatch.setattr(config, "mu", 2.0)
    monkeypatch.setattr(config, "n_list", [2, 3])
    monkeypatch.setattr(config, "degree", 2)
    request = StudyRequest()

    assert request.mu == 2.0
    assert request.n_list == [2, 3]
    assert request.degree == 2
    assert request.lam == config.lam
    assert StudyRequest(mu=0.25).mu == 0.25
