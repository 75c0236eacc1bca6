"""
Tests for the logging helpers.
"""

import importlib
import logging

import pytest

from src.utils.logger import LOG_FORMAT, get_logger, stage_timer


def test_get_logger_single_handler():
    first = get_logger(logger_name="tests.logger.single")
    second = get_logger(logger_name="tests.logger.single")

    assert first is second
    assert len(first.handlers) == 1


def test_get_logger_explicit_level():
    logger = get_logger(logger_name="tests.logger.level", level="debug")
    assert logger.level == logging.DEBUG


def test_get_logger_env_level(monkeypatch):
    monkeypatch.setenv("LOG_LEVEL", "warning")
    logger = get_logger(logger_name="tests.logger.env")
    assert logger.level == logging.WARNING


def test_stage_timer_records_elapsed(caplog):
    logger = get_logger(logger_name="tests.logger.timer", level="DEBUG")
    timings = {}

    with caplog.at_level(logging.DEBUG, logger="tests.logger.timer"):
        with stage_timer(logger, "assembly", timings):
            sum(range(1000))

    assert timings["assembly"] >= 0.0
    assert "assembly took" in caplog.text


def test_stage_timer_records_on_failure():
    """Test that a failing stage still reports its time before the error propagates."""
    logger = get_logger(logger_name="tests.logger.failure")
    timings = {}

    with pytest.raises(RuntimeError):
        with stage_timer(logger, "solve", timings):
            raise RuntimeError("singular")

    assert "solve" in timings


@pytest.mark.parametrize(
    "module_name",
    [
        "src.cli",
        "src.main",
        "src.api.routes",
        "src.fem.mesh",
        "src.fem.quadrature",
        "src.fem.spaces",
        "src.fem.assembly",
        "src.fem.solver",
        "src.fem.projection",
        "src.core.monitor",
        "src.core.pipeline",
    ],
)
def test_module_loggers_named_after_module(module_name):
    """Test that each module logs under its own dotted name with the shared format."""
    module = importlib.import_module(module_name)

    assert module.logger.name == module_name
    assert module.logger.handlers[0].formatter._fmt == LOG_FORMAT
