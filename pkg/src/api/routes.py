"""
API routes for the axisymmetric elasticity solver.
Handles convergence study requests, stored reports and determinant checks.
"""

from fastapi import APIRouter, HTTPException, Query
from fastapi.concurrency import run_in_threadpool
from typing import Optional
from src.core.models import (
    DeterminantRequest,
    DeterminantResponse,
    ErrorReport,
    ErrorResponse,
    StudyEventList,
    StudyRequest,
    StudyResponse,
)
from src.agents.study_agent import ConvergenceAgent, StudyError
from src.core import events
from src.fem.projection import mt_matrix_from_rstar
from src.utils.logger import get_logger

logger = get_logger(logger_name=__name__)

# Create router
router = APIRouter(prefix="/api/v1")

# Global agent instance (will be initialized in main.py)
agent: ConvergenceAgent = None


def set_agent(convergence_agent: ConvergenceAgent):
    """Set the global agent instance."""
    global agent
    agent = convergence_agent


@router.post("/studies", response_model=StudyResponse)
async def run_study(request: StudyRequest):
    """
    Run a convergence study.

    Returns:
        StudyResponse with errors and rates per mesh

    Raises:
        HTTPException: 503 if the agent is missing, 500 if a solve failed
    """
    if agent is None:
        raise HTTPException(status_code=503, detail="Convergence agent not initialized")

    logger.info(f"Received study request {request.case_id} k={request.degree} n={request.n_list}")

    try:
        return await run_in_threadpool(agent.run_study, request)

    except StudyError as e:
        logger.error(f"Study failed: {e}")
        error_response = ErrorResponse(code=500, message=str(e))
        raise HTTPException(status_code=500, detail=error_response.model_dump())

    except ValueError as e:
        raise HTTPException(status_code=422, detail=str(e))


@router.get("/studies", response_model=StudyEventList)
async def list_studies(
    limit: int = Query(default=20, le=100),
    offset: int = Query(default=0),
    case_id: Optional[str] = Query(None, description="Filter by manufactured case"),
    degree: Optional[int] = Query(None, description="Filter by polynomial degree"),
):
    """
    Retrieve a paginated list of recorded studies.
    """
    event_list = events.list_events(limit=limit, offset=offset, case_id=case_id, degree=degree)
    has_more = len(event_list) == limit
    return StudyEventList(events=event_list, has_more=has_more)


@router.get("/studies/{study_id}", response_model=ErrorReport)
async def get_study(study_id: str):
    """
    Retrieve the stored report of a single study.
    """
    report = events.get_report(study_id)
    if report is None:
        raise HTTPException(status_code=404, detail="Study ID not found")
    return report


@router.post("/checks/determinant", response_model=DeterminantResponse)
async def check_determinant(request: DeterminantRequest):
    """Compare the numeric determinant of M_T with its closed form."""
    result = mt_matrix_from_rstar(request.r1, request.r2)
    return DeterminantResponse(
        r1=request.r1,
        r2=request.r2,
        determinant=result.determinant,
        closed_form=result.closed_form,
        relative_difference=abs(result.determinant - result.closed_form) / abs(result.closed_form),
    )
