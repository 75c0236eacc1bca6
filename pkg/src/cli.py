"""
Command-line runner for convergence studies.

    python main.py --experiment 1 --degree 2 --n 4,6,8 --format markdown
"""

import argparse
import sys
from typing import List, Optional, Sequence, TextIO

from pydantic import ValidationError

from src.agents.study_agent import ConvergenceAgent, StudyError
from src.core.config import DIAGONALS, OUTPUT_FORMATS, RunConfig
from src.core.manufactured import manufactured_case
from src.core.models import ERROR_COLUMNS, ErrorReport
from src.fem.assembly import MaterialParams
from src.fem.mesh import Diagonal
from src.utils.logger import get_logger

logger = get_logger(logger_name=__name__)

CSV_HEADER = "h,sigma_err,sigma_rate,u_err,u_rate,asym_err,asym_rate"
EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2


class ConfigError(Exception):
    """Raised for unknown flags or invalid values."""
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    """Flags left unset fall back to the RunConfig defaults (mu = 1/2, lambda = 1, gamma = 1)."""
    parser = _Parser(description="Convergence study for axisymmetric weak-symmetry elasticity")
    parser.add_argument("--experiment", type=int, help="Manufactured experiment, 1 or 2 (default: 1)")
    parser.add_argument("--degree", type=int, help="Polynomial degree k, 1..3 (default: 1)")
    parser.add_argument("--n", type=str, dest="n_list", help="Comma list of cells per side (default: 4,6,8,10,12)")
    parser.add_argument("--gamma", type=float, help="Grad-div weight (default: 1)")
    parser.add_argument("--mu", type=float, help="Lame shear modulus (default: 0.5)")
    parser.add_argument("--lambda", type=float, dest="lam", help="Lame first parameter (default: 1)")
    parser.add_argument("--diagonal", type=str, help=f"One of {DIAGONALS} (default: north-east)")
    parser.add_argument("--quad-bump", type=int, dest="quadrature_bump", help="Extra quadrature exactness (default: 0)")
    parser.add_argument("--format", type=str, dest="output_format", help=f"One of {OUTPUT_FORMATS} (default: csv)")
    parser.add_argument("--out", type=str, dest="output_path", help="Output file (default: stdout)")
    return parser


def parse_config(argv: Optional[Sequence[str]] = None) -> RunConfig:
    """
    Parse flags into a validated RunConfig.

    Raises:
        ConfigError: unknown flag or invalid value
    """
    args = build_parser().parse_args(argv)
    given = {name: value for name, value in vars(args).items() if value is not None}
    try:
        return RunConfig(**given)
    except (ValidationError, ValueError) as e:
        raise ConfigError(str(e)) from e


def _error(value: float) -> str:
    return f"{value:.3E}"


def _rate(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.1f}"


def format_csv(report: ErrorReport) -> str:
    lines = [CSV_HEADER]
    for row in report.rows:
        cells = [repr(row.h)]
        for name in ERROR_COLUMNS:
            cells += [_error(getattr(row, name)), _rate(getattr(row, name.replace("_err", "_rate")))]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def format_markdown(report: ErrorReport) -> str:
    """Table with h as 1/n, '--' on the finest row and a final predicted-rate row."""
    lines = [
        "| h | sigma_err | rate | u_err | rate | asym_err | rate |",
        "|---|---|---|---|---|---|---|",
    ]
    for row in report.rows:
        cells = [f"1/{row.n}"]
        for name in ERROR_COLUMNS:
            rate = getattr(row, name.replace("_err", "_rate"))
            cells += [_error(getattr(row, name)), "--" if rate is None else _rate(rate)]
        lines.append("| " + " | ".join(cells) + " |")
    predicted = f"{float(report.degree):.1f}"
    lines.append("| Pred. | | " + " | | ".join([predicted] * len(ERROR_COLUMNS)) + " |")
    return "\n".join(lines) + "\n"


def _write(text: str, path: Optional[str], stream: TextIO) -> None:
    if path:
        with open(path, "w") as f:
            f.write(text)
    else:
        stream.write(text)


def run(run_config: RunConfig, stream: TextIO = sys.stdout) -> int:
    """
    Execute the configured study and write its table.

    Returns:
        0 on success, 2 when a solve failed (the partial table is still written)
    """
    params = MaterialParams(mu=run_config.mu, lam=run_config.lam, gamma=run_config.gamma)
    formatter = format_markdown if run_config.output_format == "markdown" else format_csv
    agent = ConvergenceAgent()
    case = manufactured_case(run_config.case_id, params)

    try:
        report = agent.convergence_study(
            case,
            run_config.degree,
            run_config.n_list,
            params,
            Diagonal(run_config.diagonal),
            run_config.quadrature_bump,
        )
    except StudyError as e:
        logger.error(f"Study failed: {e}")
        _write(formatter(e.partial), run_config.output_path, stream)
        return EXIT_SOLVER

    _write(formatter(report), run_config.output_path, stream)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    try:
        run_config = parse_config(argv)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return run(run_config)


if __name__ == "__main__":
    sys.exit(main())
