"""
Gauss rules on the reference triangle and edge, and r-weighted integration.
Includes the closed-form weighted monomial integrals used as an exactness oracle.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi

from src.fem.mesh import AffineMap
from src.utils.logger import get_logger

logger = get_logger(logger_name=__name__)

MAX_EXACTNESS = 20


class QuadratureError(ValueError):
    """Raised for unsupported rules or non-finite integrand values."""
    pass


@dataclass(frozen=True)
class QuadratureRule:
    """Reference points, positive weights and declared polynomial exactness."""

    points: np.ndarray  # (nq, 2) for triangles, (nq,) for edges
    weights: np.ndarray
    exactness: int

    @property
    def xi(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def eta(self) -> np.ndarray:
        return self.points[:, 1]

    def __len__(self) -> int:
        return int(self.weights.shape[0])


@lru_cache(maxsize=None)
def triangle_gauss_rule(exactness: int) -> QuadratureRule:
    """
    Collapsed Gauss rule on the reference triangle (0,0), (1,0), (0,1).

    Uses Gauss-Legendre in the collapsed direction and Gauss-Jacobi with
    weight (1 - t) in the other, so every point is interior.
    """
    if not 0 <= exactness <= MAX_EXACTNESS:
        raise QuadratureError(f"Unsupported triangle exactness {exactness} (0..{MAX_EXACTNESS})")

    if exactness <= 1:
        return QuadratureRule(
            points=np.array([[1.0 / 3.0, 1.0 / 3.0]]),
            weights=np.array([0.5]),
            exactness=1,
        )

    m = (exactness + 2) // 2
    x, wx = leggauss(m)
    s = 0.5 * (x + 1.0)
    ws = 0.5 * wx
    y, wy = roots_jacobi(m, 1.0, 0.0)
    t = 0.5 * (y + 1.0)
    wt = 0.25 * wy

    ss, tt = np.meshgrid(s, t, indexing="ij")
    wws, wwt = np.meshgrid(ws, wt, indexing="ij")
    points = np.column_stack([(ss * (1.0 - tt)).ravel(), tt.ravel()])
    weights = (wws * wwt).ravel()
    return QuadratureRule(points=points, weights=weights, exactness=min(2 * m - 1, MAX_EXACTNESS))


@lru_cache(maxsize=None)
def edge_gauss_rule(npoints: int) -> QuadratureRule:
    """Gauss-Legendre rule on (0, 1), exact for degree 2*npoints - 1."""
    if npoints < 1:
        raise QuadratureError(f"Edge rule needs at least one point, got {npoints}")
    x, w = leggauss(npoints)
    return QuadratureRule(points=0.5 * (x + 1.0), weights=0.5 * w, exactness=2 * npoints - 1)


def exact_weighted_monomial(s: int, t: int, r1: float, r2: float, include_one: bool) -> float:
    """
    Closed form of the integral of xi^s eta^t (r1 xi + r2 eta [+ 1]) over the
    reference triangle.
    """
    scale = math.factorial(s) * math.factorial(t) / math.factorial(s + t + 3)
    return scale * (r1 * (s + 1) + r2 * (t + 1) + (s + t + 3) * (1.0 if include_one else 0.0))


def bdm_integral_table(r1: float, r2: float) -> Dict[Tuple[int, int], float]:
    """Weighted integrals of xi^s eta^t r-hat/r0 for 1 <= s + t <= 3 (r0 > 0 form)."""
    return {
        (s, t): exact_weighted_monomial(s, t, r1, r2, True)
        for total in (1, 2, 3)
        for s in range(total + 1)
        for t in (total - s,)
    }


def physical_points(amap: AffineMap, rule: QuadratureRule) -> Tuple[np.ndarray, np.ndarray]:
    return amap.to_physical(rule.xi, rule.eta)


def weighted_measure(amap: AffineMap, rule: QuadratureRule) -> np.ndarray:
    """Quadrature weights of the r-weighted physical measure r dr dz."""
    return rule.weights * amap.r_hat(rule.xi, rule.eta) * amap.det


def integrate_weighted(
    amap: AffineMap,
    rule: QuadratureRule,
    integrand: Callable[[np.ndarray, np.ndarray], np.ndarray],
) -> float:
    """
    Integrate f(r, z) r over a mesh triangle.

    Args:
        amap: Affine map of the triangle
        rule: Reference triangle rule
        integrand: Vectorized function of the physical coordinates

    Returns:
        sum_q w_q f(F(xi_q)) r(xi_q) det(J)
    """
    r, z = physical_points(amap, rule)
    values = np.broadcast_to(np.asarray(integrand(r, z), dtype=float), r.shape)
    if not np.all(np.isfinite(values)):
        raise QuadratureError("Integrand is not finite at a quadrature point")
    return float(np.dot(weighted_measure(amap, rule), values))


def assembly_exactness(k: int, bump: int = 0) -> int:
    return min(2 * k + 4 + bump, MAX_EXACTNESS)


def error_exactness(k: int, bump: int = 0) -> int:
    return min(2 * k + 6 + bump, MAX_EXACTNESS)
