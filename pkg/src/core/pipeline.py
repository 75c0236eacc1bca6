"""
Single-mesh solve pipeline: mesh, assembly, factorization and error measurement.
"""

from typing import Dict, Optional

from src.core.manufactured import ManufacturedCase
from src.core.models import ErrorRow
from src.core.monitor import compute_errors
from src.fem.assembly import MaterialParams, assemble
from src.fem.mesh import Diagonal, build_unit_square_mesh
from src.fem.solver import SolutionFields, solve
from src.utils.logger import get_logger, stage_timer

logger = get_logger(logger_name=__name__)


class StudyPipeline:
    """Runs one refinement level of a convergence study."""

    def __init__(
        self,
        case: ManufacturedCase,
        k: int,
        params: MaterialParams,
        diagonal: Diagonal = Diagonal.NORTH_EAST,
        quadrature_bump: int = 0,
        logger=None,
    ):
        self.case = case
        self.k = k
        self.params = params
        self.diagonal = Diagonal(diagonal)
        self.quadrature_bump = quadrature_bump
        self.logger = logger or get_logger(logger_name=__name__)
        self.last_solution: Optional[SolutionFields] = None
        self.last_timings: Dict[str, float] = {}

    def run_level(self, n: int) -> ErrorRow:
        """
        Assemble, solve and measure on the n x n mesh.

        Args:
            n: Cells per side

        Returns:
            ErrorRow without rates

        Raises:
            SolverError: singular factorization or residual failure
        """
        timings: Dict[str, float] = {}
        self.last_timings = timings
        with stage_timer(self.logger, "mesh", timings):
            mesh = build_unit_square_mesh(n, self.diagonal)
        with stage_timer(self.logger, "assembly", timings):
            system = assemble(mesh, self.k, self.params, self.case, quadrature_bump=self.quadrature_bump)
        with stage_timer(self.logger, "solve", timings):
            solution = solve(system)
        with stage_timer(self.logger, "errors", timings):
            sigma_err, u_err, asym_err = compute_errors(solution, self.case, mesh, self.k, self.quadrature_bump)
        self.last_solution = solution

        self.logger.info(
            f"{self.case.case_id} k={self.k} n={n}: {system.size} unknowns, "
            f"sigma={sigma_err:.3e} u={u_err:.3e} as={asym_err:.3e} ({sum(timings.values()):.2f}s)"
        )
        return ErrorRow(
            n=n,
            h=mesh.h,
            sigma_err=sigma_err,
            u_err=u_err,
            asym_err=asym_err,
            unknowns=system.size,
        )
