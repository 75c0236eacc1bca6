"""
Convergence agent that orchestrates refinement studies.
Handles request processing, per-mesh solves, rate computation and event recording.
"""

import uuid
import time
from typing import List, Optional

from src.core import events
from src.core.manufactured import ManufacturedCase, manufactured_case
from src.core.models import ErrorReport, ErrorRow, StudyEvent, StudyRequest, StudyResponse
from src.core.monitor import MeasurementError, RateMonitor
from src.core.pipeline import StudyPipeline
from src.fem.assembly import AssemblyError, MaterialParams
from src.fem.mesh import Diagonal
from src.fem.solver import SolverError
from src.utils.logger import get_logger

logger = get_logger(logger_name=__name__)


class StudyError(Exception):
    """Exception raised when a study stops before its finest mesh."""

    def __init__(self, message: str, partial: ErrorReport, field: Optional[str] = None):
        super().__init__(message)
        self.partial = partial
        self.field = field


class ConvergenceAgent:
    """Runs mesh-refinement studies and keeps a record of them."""

    def __init__(self, monitor: Optional[RateMonitor] = None):
        self.monitor = monitor or RateMonitor()
        self.logger = get_logger(logger_name=__name__)

    def convergence_study(
        self,
        case: ManufacturedCase,
        k: int,
        n_list: List[int],
        params: MaterialParams,
        diagonal: Diagonal = Diagonal.NORTH_EAST,
        quadrature_bump: int = 0,
    ) -> ErrorReport:
        """
        Solve on each mesh of n_list and collect errors and rates.

        Args:
            case: Manufactured case
            k: Polynomial degree
            n_list: Strictly increasing cells per side
            params: Material and stabilization parameters
            diagonal: Mesh split direction
            quadrature_bump: Extra quadrature exactness

        Returns:
            ErrorReport with rates on every row but the last

        Raises:
            ValueError: n_list empty or not strictly increasing
            StudyError: a level failed; .partial holds the finished rows
        """
        if not n_list or any(a >= b for a, b in zip(n_list, n_list[1:])):
            raise ValueError("n_list must be non-empty and strictly increasing")

        diagonal = Diagonal(diagonal)
        pipeline = StudyPipeline(case, k, params, diagonal, quadrature_bump, logger=self.logger)
        self.logger.info(f"Starting study {case.case_id} k={k} n={list(n_list)}")

        rows: List[ErrorRow] = []
        base = {
            "case_id": case.case_id,
            "degree": k,
            "params": {"mu": params.mu, "lambda": params.lam, "gamma": params.gamma},
            "diagonal": diagonal.value,
        }
        for n in n_list:
            try:
                rows.append(pipeline.run_level(n))
            except (SolverError, AssemblyError, MeasurementError) as e:
                self.logger.error(f"Study {case.case_id} k={k} stopped at n={n}: {e}")
                partial = ErrorReport(rows=rows, partial=True, failure=f"n={n}: {e}", **base).with_rates()
                raise StudyError(f"Study stopped at n={n}: {e}", partial=partial, field=getattr(e, "field", None)) from e

        report = ErrorReport(rows=rows, **base).with_rates()
        assessment = self.monitor.assess(report)
        self.logger.info(f"Finished study {case.case_id} k={k}: {assessment['explanation']}")
        return report

    def run_study(self, request: StudyRequest) -> StudyResponse:
        """
        Process a study request, record it and return the report.

        Raises:
            StudyError: a level failed
        """
        study_id = str(uuid.uuid4())
        start_time = time.time()
        self.logger.info(f"Processing study request {study_id}")

        params = MaterialParams(mu=request.mu, lam=request.lam, gamma=request.gamma)
        case = manufactured_case(request.case_id, params)
        try:
            report = self.convergence_study(
                case,
                request.degree,
                request.n_list,
                params,
                Diagonal(request.diagonal),
                request.quadrature_bump,
            )
        except StudyError as e:
            self._record(study_id, request, e.partial, start_time)
            raise
        latency_ms = self._record(study_id, request, report, start_time)

        assessment = self.monitor.assess(report)
        return StudyResponse(
            study_id=study_id,
            report=report,
            metadata={
                "latency_ms": latency_ms,
                "within_window": assessment["within_window"],
                "explanation": assessment["explanation"],
            },
        )

    def _record(self, study_id: str, request: StudyRequest, report: ErrorReport, start_time: float) -> float:
        latency_ms = (time.time() - start_time) * 1000
        event = StudyEvent(
            event_id=str(uuid.uuid4()),
            study_id=study_id,
            timestamp=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            case_id=request.case_id,
            degree=request.degree,
            n_list=request.n_list,
            latency_ms=latency_ms,
            partial=report.partial,
        )
        events.record_event(event, report)
        return latency_ms
