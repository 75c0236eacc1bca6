"""
Sparse direct solve of the saddle-point system.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
from scipy.linalg import eigh
from scipy.sparse.linalg import splu

from src.fem.assembly import SaddleSystem, coupling_block, displacement_mass_matrix, sigma_norm_matrix
from src.fem.quadrature import triangle_gauss_rule
from src.fem.spaces import DofLayout
from src.utils.logger import get_logger

logger = get_logger(logger_name=__name__)

RESIDUAL_TOL = 1e-9
PIVOT_TOL = 1e-14


class SolverError(Exception):
    """Raised when the factorization is singular or the residual check fails."""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class SolutionFields:
    """Full coefficient vector with constrained DOFs restored as zeros."""

    coefficients: np.ndarray
    layout: DofLayout
    stats: Dict[str, Any] = field(default_factory=dict)

    def block(self, name: str) -> np.ndarray:
        start, stop = self.layout.offsets[name]
        return self.coefficients[start:stop]

    @property
    def sigma_row1(self) -> np.ndarray:
        return self.block("sigma_row1")

    @property
    def sigma_row2(self) -> np.ndarray:
        return self.block("sigma_row2")

    @property
    def sigma_theta(self) -> np.ndarray:
        return self.block("sigma_theta")

    @property
    def w(self) -> np.ndarray:
        return self.block("w")

    @property
    def p(self) -> np.ndarray:
        return self.block("p")


def _zero_rows(system: SaddleSystem) -> np.ndarray:
    matrix = system.matrix.tocsr()
    return np.flatnonzero(np.diff(matrix.indptr) == 0)


def _singular_field(system: SaddleSystem, local_index: int) -> str:
    return system.layout.field_of(int(system.free_dofs[local_index]))


def solve(system: SaddleSystem) -> SolutionFields:
    """
    Factorize with SuperLU and solve M x = b.

    Raises:
        SolverError: zero pivot (names the field block) or residual above tolerance
    """
    matrix = system.matrix.tocsc()
    layout = system.layout

    empty = _zero_rows(system)
    if len(empty):
        name = _singular_field(system, empty[0])
        raise SolverError(f"Singular system: empty row in block {name}", field=name)

    try:
        lu = splu(matrix)
    except RuntimeError as e:
        logger.error(f"Factorization failed for {system.size} unknowns: {e}")
        raise SolverError(f"Singular factorization: {e}", field=None) from e

    pivots = np.abs(lu.U.diagonal())
    scale = max(float(pivots.max()), 1.0)
    if pivots.min() <= PIVOT_TOL * scale:
        column = int(np.argmin(pivots))
        original = int(np.flatnonzero(lu.perm_c == column)[0])
        name = _singular_field(system, original)
        logger.error(f"Zero pivot in block {name}")
        raise SolverError(f"Zero pivot in block {name}", field=name)

    x = lu.solve(system.rhs)
    if not np.all(np.isfinite(x)):
        raise SolverError("Solution contains non-finite entries")

    b_norm = float(np.linalg.norm(system.rhs))
    res_norm = float(np.linalg.norm(system.matrix @ x - system.rhs))
    residual = res_norm / b_norm if b_norm > 0.0 else res_norm
    if residual > RESIDUAL_TOL:
        logger.error(f"Residual check failed: {residual:.3e}")
        raise SolverError(f"Relative residual {residual:.3e} exceeds {RESIDUAL_TOL:.0e}")

    coefficients = np.zeros(layout.n_dofs)
    coefficients[system.free_dofs] = x
    stats = {
        "unknowns": layout.n_dofs,
        "free": system.size,
        "constrained": int(len(layout.constrained_dofs)),
        "residual": residual,
        "fill": int(lu.L.nnz + lu.U.nnz),
    }
    logger.debug(f"Solved {system.size} unknowns, residual {residual:.2e}, fill {stats['fill']}")
    return SolutionFields(coefficients=coefficients, layout=layout, stats=stats)


def coupling_singular_value(system: SaddleSystem, exactness: Optional[int] = None) -> float:
    """
    Smallest singular value of the divergence coupling b(tau, v) measured in
    the Sigma-norm on stresses and the weighted L2 norm on displacements.
    Dense generalized eigenproblem, meant for small meshes.
    """
    layout = system.layout
    rule = triangle_gauss_rule(exactness or system.exactness)
    coupling = coupling_block(system).toarray()
    gram = sigma_norm_matrix(layout, rule).toarray()
    mass = displacement_mass_matrix(layout, rule).toarray()

    schur = coupling @ np.linalg.solve(gram, coupling.T)
    eigenvalues = eigh(schur, mass, eigvals_only=True)
    smallest = float(np.sqrt(max(eigenvalues[0], 0.0)))
    logger.debug(f"Coupling singular value {smallest:.4e} on {layout.mesh.n_triangles} triangles")
    return smallest
