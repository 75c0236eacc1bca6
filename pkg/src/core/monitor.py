"""
Error measurement against manufactured solutions and rate assessment.
Implements the Sigma-norm, displacement and asymmetry errors with rate checks.
"""

from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.core.manufactured import ManufacturedCase
from src.core.models import ERROR_COLUMNS, ErrorReport
from src.fem.mesh import Mesh, canonical_affine
from src.fem.quadrature import error_exactness, triangle_gauss_rule
from src.fem.solver import SolutionFields
from src.fem.spaces import evaluate_fields, tabulate
from src.utils.logger import get_logger

logger = get_logger(logger_name=__name__)


class MeasurementError(Exception):
    """Raised when an error norm is not finite."""
    pass


def compute_errors(
    solution: SolutionFields,
    case: ManufacturedCase,
    mesh: Mesh,
    k: int,
    quadrature_bump: int = 0,
) -> Tuple[float, float, float]:
    """
    Measure one discrete solution against the exact fields.

    Args:
        solution: Solved coefficients with their layout
        case: Manufactured case the system was assembled with
        mesh: Mesh of the solution
        k: Polynomial degree
        quadrature_bump: Extra exactness on top of 2k + 6

    Returns:
        (sigma_err, u_err, asym_err), all r-weighted

    Raises:
        MeasurementError: a norm is not finite
    """
    layout = solution.layout
    if layout.degree != k or layout.mesh is not mesh:
        raise ValueError("Solution was not computed on this mesh and degree")

    rule = triangle_gauss_rule(error_exactness(k, quadrature_bump))
    tables = tabulate(layout.basis, rule.points, rule.weights)
    sigma_sq = u_sq = asym_sq = 0.0

    for tri in range(mesh.n_triangles):
        fields = evaluate_fields(layout, solution.coefficients, tri, tables)
        r, z = fields.r, fields.z
        wr = rule.weights * canonical_affine(tri, mesh).det * r

        d_sigma = np.moveaxis(case.sigma(r, z), -1, 0) - fields.sigma
        d_theta = case.sigma_theta(r, z) - fields.sigma_theta
        d_div = case.f(r, z).T - fields.div_axi
        d_u = case.u(r, z).T - fields.displacement
        skew = 0.5 * (fields.sigma[:, 0, 1] - fields.sigma[:, 1, 0])

        sigma_sq += float(np.dot(wr, np.sum(d_sigma ** 2, axis=(1, 2)) + d_theta ** 2 + np.sum(d_div ** 2, axis=1)))
        u_sq += float(np.dot(wr, np.sum(d_u ** 2, axis=1)))
        asym_sq += float(np.dot(wr, 2.0 * skew ** 2))

    errors = (float(np.sqrt(sigma_sq)), float(np.sqrt(u_sq)), float(np.sqrt(asym_sq)))
    if not all(np.isfinite(errors)):
        logger.error(f"Non-finite error norm on n={round(1 / mesh.h) if mesh.h else '?'}: {errors}")
        raise MeasurementError(f"Non-finite error norm {errors}")
    return errors


def best_displacement_error(case: Any, mesh: Mesh, k: int, quadrature_bump: int = 0) -> float:
    """
    r-weighted distance from the exact displacement to the recovered-displacement
    space P_{k-1}^2 + x_perp P_{k-1}, solved as a weighted least-squares fit per triangle.
    Any u_h = w_h + x_perp p_h is at least this far from u.
    """
    rule = triangle_gauss_rule(error_exactness(k, quadrature_bump))
    scalars = [rule.xi ** i * rule.eta ** j for i in range(k) for j in range(k - i)]
    total = 0.0

    for tri in range(mesh.n_triangles):
        amap = canonical_affine(tri, mesh)
        r, z = amap.to_physical(rule.xi, rule.eta)
        zero = np.zeros_like(r)
        # x_perp P_{k-1} overlaps P_{k-1}^2 for k >= 2, lstsq handles the rank drop
        columns = [np.concatenate([s, zero]) for s in scalars]
        columns += [np.concatenate([zero, s]) for s in scalars]
        columns += [np.concatenate([z * s, -r * s]) for s in scalars]
        basis = np.stack(columns, axis=1)

        sqrt_w = np.sqrt(np.tile(rule.weights * amap.det * r, 2))
        target = np.asarray(case.u(r, z), dtype=float).reshape(-1)
        coef, *_ = np.linalg.lstsq(sqrt_w[:, None] * basis, sqrt_w * target, rcond=None)
        residual = sqrt_w * (target - basis @ coef)
        total += float(np.dot(residual, residual))

    return float(np.sqrt(total))


class RateMonitor:
    """Checks a report against the expected convergence rate window."""

    def __init__(self, thresholds: Optional[Dict[str, float]] = None):
        self.logger = get_logger(logger_name=__name__)

        # Window around the predicted rate k
        self.thresholds = {
            'below': 0.15,
            'above': 0.2,
        }
        if thresholds:
            self.thresholds.update(thresholds)

    def expected_window(self, k: int) -> Tuple[float, float]:
        return k - self.thresholds['below'], k + self.thresholds['above']

    def assess(self, report: ErrorReport, pairs: Optional[int] = None) -> Dict[str, Any]:
        """
        Assess the rates of a report.

        Args:
            report: Report with rates filled
            pairs: Only check the finest this many consecutive pairs

        Returns:
            Dictionary with the window, out-of-window rates and monotonicity flags
        """
        low, high = self.expected_window(report.degree)
        outside: Dict[str, List[float]] = {}
        monotone: Dict[str, bool] = {}
        for name in ERROR_COLUMNS:
            errors = [getattr(row, name) for row in report.rows]
            monotone[name] = all(a > b for a, b in zip(errors, errors[1:]))
            if not monotone[name]:
                self.logger.warning(f"{report.case_id} k={report.degree}: {name} is not decreasing: {errors}")
            rates = [rate for rate in report.rates(name) if rate is not None]
            if pairs is not None:
                rates = rates[-pairs:]
            outside[name] = [rate for rate in rates if not low <= rate <= high]

        within = not any(outside.values())
        return {
            "window": (low, high),
            "within_window": within,
            "outside": outside,
            "monotone": monotone,
            "explanation": self._explain(report, within, outside),
        }

    def _explain(self, report: ErrorReport, within: bool, outside: Dict[str, List[float]]) -> str:
        if within:
            return f"Rates match the predicted order {report.degree}"
        columns = [name for name, rates in outside.items() if rates]
        return f"Rates outside the expected window for: {', '.join(columns)}"
