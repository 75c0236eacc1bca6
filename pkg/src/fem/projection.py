"""
Stress interpolation operators, the interior-moment matrix M_T of the
BDM_2 interpolant and a quadrature check of the rotation-form identity.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import sympy as sp

from src.fem.mesh import AXIS_TOL, LOCAL_EDGES, AffineMap, canonical_affine
from src.fem.quadrature import MAX_EXACTNESS, edge_gauss_rule, exact_weighted_monomial, triangle_gauss_rule
from src.fem.spaces import (
    ElementBasis,
    DofLayout,
    interior_test_functions,
    piola,
    reference_basis,
    reference_edge_normal,
    reference_edge_points,
)
from src.utils.logger import get_logger
from src.utils.symbolic import R, Z, scalar_function, tensor_function

logger = get_logger(logger_name=__name__)

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]

INTERPOLATION_DEGREES = (1, 2)
EDGE_POINTS = 8
MOMENT_EXACTNESS = 16
CHECK_EDGE_POINTS = 10
CHECK_EXACTNESS = 20
CONDITION_WARN = 1e8
CONDITION_MAX = 1e13

G2 = 0.5 + math.sqrt(3.0) / 6.0


class InterpolationError(Exception):
    """Raised when a local interpolation system is singular or the input is invalid."""
    pass


@dataclass(frozen=True)
class InterpolationResult:
    """Local interpolant in the unsigned element basis [row 1, row 2] and the P_k basis."""

    sigma_coeffs: np.ndarray  # (2, nb)
    theta_coeffs: np.ndarray  # (npk,)
    condition_number: float

    def as_local_vector(self) -> np.ndarray:
        return np.concatenate([self.sigma_coeffs.ravel(), self.theta_coeffs])


@dataclass(frozen=True)
class MTResult:
    matrix: np.ndarray
    determinant: float
    closed_form: float


def _physical_edge(amap: AffineMap, local_edge: int, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Physical points of a local edge and its outward normal scaled by the edge length."""
    ref = reference_edge_points(local_edge, t)
    r, z = amap.to_physical(ref[:, 0], ref[:, 1])
    a, b = LOCAL_EDGES[local_edge]
    corners = np.column_stack(amap.to_physical(np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0])))
    d = corners[b] - corners[a]
    return r, z, np.array([d[1], -d[0]])


def _on_axis(amap: AffineMap, local_edge: int) -> bool:
    r, _, _ = _physical_edge(amap, local_edge, np.array([0.0, 1.0]))
    return bool(np.all(np.abs(r) <= AXIS_TOL))


def _tensor_values(tau: Field, r: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Evaluate a tensor field as (nq, 2, 2)."""
    values = np.asarray(tau(r, z), dtype=float)
    values = np.broadcast_to(values.reshape(2, 2, -1) if values.ndim == 3 else values[:, :, None], (2, 2, len(r)))
    return np.moveaxis(values, -1, 0)


def _interior_tests(r: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Constant unit tensors followed by x_perp (x) e1 and x_perp (x) e2, shape (6, nq, 2, 2)."""
    tests = np.zeros((6, len(r), 2, 2))
    for m, (i, j) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
        tests[m, :, i, j] = 1.0
    for j in range(2):
        tests[4 + j, :, 0, j] = z
        tests[4 + j, :, 1, j] = -r
    return tests


def _theta_projection(amap: AffineMap, basis: ElementBasis, tau_theta: Field, exactness: int) -> np.ndarray:
    """Unweighted L2 projection of sigma_theta onto P_k."""
    rule = triangle_gauss_rule(exactness)
    r, z = amap.to_physical(rule.xi, rule.eta)
    pk = basis.tabulate_pk(rule.points)
    w = rule.weights * amap.det
    mass = np.einsum("q,qi,qj->ij", w, pk, pk)
    rhs = np.einsum("q,q,qi->i", w, np.broadcast_to(tau_theta(r, z), r.shape), pk)
    return np.linalg.solve(mass, rhs)


def interpolate_stress(
    k: int,
    amap: AffineMap,
    tau: Field,
    tau_theta: Field,
    basis: Optional[ElementBasis] = None,
) -> InterpolationResult:
    """
    Local interpolant (Pi_h tau, pi_h tau_theta) on one triangle.

    Edge conditions take r-weighted moments against P_k on every edge; for
    k = 2 six interior conditions couple the rows through x_perp. Axis-edge
    DOFs are set to zero and their conditions dropped.

    Args:
        k: Polynomial degree, 1 or 2
        amap: Affine map of the triangle
        tau: Tensor field of (r, z) returning (2, 2, nq)
        tau_theta: Scalar field of (r, z)
        basis: Reference basis, built when omitted

    Returns:
        InterpolationResult with local coefficients and condition number

    Raises:
        InterpolationError: unsupported degree or singular local system
    """
    if k not in INTERPOLATION_DEGREES:
        raise InterpolationError(f"Stress interpolation is defined for k in {INTERPOLATION_DEGREES}, got {k}")
    basis = basis or reference_basis(k)
    nb = basis.n_bdm
    n = 2 * nb
    matrix = np.zeros((n, n))
    rhs = np.zeros(n)
    row = 0

    edge = edge_gauss_rule(EDGE_POINTS)
    t = edge.points
    for e in range(3):
        values, _ = basis.tabulate_bdm(reference_edge_points(e, t))
        flux = values @ reference_edge_normal(e)  # (nq, nb)
        if _on_axis(amap, e):
            for rho in range(2):
                for j in range(k + 1):
                    matrix[row, rho * nb + e * (k + 1) + j] = 1.0
                    row += 1
            continue
        r, z, nu = _physical_edge(amap, e, t)
        tau_n = _tensor_values(tau, r, z) @ nu  # (nq, 2)
        for rho in range(2):
            for j in range(k + 1):
                weight = edge.weights * t ** j * r
                matrix[row, rho * nb : (rho + 1) * nb] = weight @ flux
                rhs[row] = weight @ tau_n[:, rho]
                row += 1

    if k == 2:
        rule = triangle_gauss_rule(MOMENT_EXACTNESS)
        r, z = amap.to_physical(rule.xi, rule.eta)
        ref_values, ref_divs = basis.tabulate_bdm(rule.points)
        values, _ = piola(amap, ref_values, ref_divs)  # (nq, nb, 2)
        tensor = _tensor_values(tau, r, z)
        wr = rule.weights * amap.det * r
        for test in _interior_tests(r, z):
            for rho in range(2):
                matrix[row, rho * nb : (rho + 1) * nb] = np.einsum("q,qsi,qi->s", wr, values, test[:, rho, :])
            rhs[row] = np.einsum("q,qij,qij->", wr, tensor, test)
            row += 1

    if row != n:
        raise InterpolationError(f"Interpolation system has {row} conditions for {n} unknowns")

    cond = float(np.linalg.cond(matrix))
    if not np.isfinite(cond) or cond > CONDITION_MAX:
        raise InterpolationError(f"Singular interpolation system on {amap.triangle_class.value} triangle (condition {cond:.3e})")
    if cond > CONDITION_WARN:
        logger.warning(f"Interpolation system poorly conditioned: {cond:.3e}")

    coeffs = np.linalg.solve(matrix, rhs)
    theta = _theta_projection(amap, basis, tau_theta, MOMENT_EXACTNESS)
    if not (np.all(np.isfinite(coeffs)) and np.all(np.isfinite(theta))):
        raise InterpolationError("Interpolant has non-finite coefficients")
    return InterpolationResult(sigma_coeffs=coeffs.reshape(2, nb), theta_coeffs=theta, condition_number=cond)


def _interpolant_values(amap: AffineMap, basis: ElementBasis, result: InterpolationResult, points: np.ndarray):
    ref_values, ref_divs = basis.tabulate_bdm(points)
    values, _ = piola(amap, ref_values, ref_divs)
    tensor = np.einsum("qsi,ps->qpi", values, result.sigma_coeffs)
    theta = basis.tabulate_pk(points) @ result.theta_coeffs
    return tensor, theta


def projection_residuals(
    k: int,
    amap: AffineMap,
    result: InterpolationResult,
    tau: Field,
    tau_theta: Field,
) -> Dict[str, float]:
    """
    Re-evaluate the three orthogonality conditions of an interpolant with
    higher-order quadrature, for displacement and rotation tests of degree k - 1.

    Returns:
        Maximum absolute residual per condition: "volume", "edge", "theta"
    """
    basis = reference_basis(k)
    rule = triangle_gauss_rule(CHECK_EXACTNESS)
    r, z = amap.to_physical(rule.xi, rule.eta)
    pi_tau, pi_theta = _interpolant_values(amap, basis, result, rule.points)
    diff = _tensor_values(tau, r, z) - pi_tau
    diff_theta = np.broadcast_to(tau_theta(r, z), r.shape) - pi_theta
    w = rule.weights * amap.det

    # grad u_h + x_perp (x) grad q_h for u_h in P_{k-1}^2, q_h in P_{k-1}
    volume = [0.0]
    if k == 2:
        tests = _interior_tests(r, z)
        volume = [abs(float(np.einsum("q,qij,qij->", w * r, diff, test))) for test in tests]

    # (u_h + x_perp q_h) restricted to an edge is a polynomial of degree <= k in t
    edge_res = []
    edge = edge_gauss_rule(CHECK_EDGE_POINTS)
    t = edge.points
    for e in range(3):
        r_e, z_e, nu = _physical_edge(amap, e, t)
        ref = reference_edge_points(e, t)
        pi_e, _ = _interpolant_values(amap, basis, result, ref)
        flux = (_tensor_values(tau, r_e, z_e) - pi_e) @ nu
        for rho in range(2):
            for j in range(k + 1):
                edge_res.append(abs(float(np.sum(edge.weights * flux[:, rho] * t ** j * r_e))))

    # z q_h and the first displacement component against the unweighted measure
    theta_res = []
    for a, b in [(a, b) for a in range(k) for b in range(k - a)]:
        mono = rule.xi ** a * rule.eta ** b
        for test in (z * mono, mono):
            theta_res.append(abs(float(np.sum(w * diff_theta * test))))

    return {"volume": max(volume), "edge": max(edge_res), "theta": max(theta_res)}


def interpolate_global(
    layout: DofLayout,
    tau: Field,
    tau_theta: Field,
    w: Optional[Field] = None,
    p: Optional[Field] = None,
    exactness: int = CHECK_EXACTNESS,
) -> np.ndarray:
    """
    Global coefficient vector from the canonical DOF functionals: edge normal
    values at the Gauss points, interior moments of the pulled-back field and
    element-wise L2 projections of sigma_theta, w and p. Axis DOFs are zero.

    Args:
        layout: DOF layout of the target space
        tau: Tensor field returning (2, 2, nq)
        tau_theta: Scalar field
        w: Optional vector field returning (2, nq), projected in the r-weighted L2 sense
        p: Optional scalar field, projected in the r-weighted L2 sense

    Returns:
        Coefficient vector of length layout.n_dofs
    """
    basis, mesh = layout.basis, layout.mesh
    k, nb = basis.degree, basis.n_bdm
    coeffs = np.zeros(layout.n_dofs)
    exactness = min(exactness, MAX_EXACTNESS)
    rule = triangle_gauss_rule(exactness)
    pk1 = basis.tabulate_pkm1(rule.points)
    tests = interior_test_functions(k)
    xi, eta = rule.xi, rule.eta

    for tri in range(mesh.n_triangles):
        amap = canonical_affine(tri, mesh)
        local = np.zeros(2 * nb)
        for e in range(3):
            r, z, nu = _physical_edge(amap, e, basis.edge_points)
            tau_n = _tensor_values(tau, r, z) @ nu
            for rho in range(2):
                local[rho * nb + e * (k + 1) : rho * nb + (e + 1) * (k + 1)] = tau_n[:, rho]

        if tests:
            r, z = amap.to_physical(xi, eta)
            inverse = np.linalg.inv(amap.jacobian)
            # inverse Piola of each row: det J^{-1} tau_rho
            pulled = amap.det * np.einsum("ij,qrj->qri", inverse, _tensor_values(tau, r, z))
            for m, (kind, a, b) in enumerate(tests):
                mono = xi ** a * eta ** b
                if kind == 0:
                    test = np.column_stack([mono, np.zeros_like(mono)])
                elif kind == 1:
                    test = np.column_stack([np.zeros_like(mono), mono])
                else:
                    test = np.column_stack([-eta * mono, xi * mono])
                for rho in range(2):
                    local[rho * nb + 3 * (k + 1) + m] = np.sum(rule.weights * np.sum(pulled[:, rho, :] * test, axis=1))

        signs = layout.stress_signs[tri, : 2 * nb]
        coeffs[layout.stress_dofs[tri, : 2 * nb]] = signs * local
        coeffs[layout.stress_dofs[tri, 2 * nb :]] = _theta_projection(amap, basis, tau_theta, exactness)

        if w is not None or p is not None:
            r, z = amap.to_physical(xi, eta)
            wr = rule.weights * amap.det * r
            mass = np.einsum("q,qi,qj->ij", wr, pk1, pk1)
            if w is not None:
                wv = np.broadcast_to(np.asarray(w(r, z), dtype=float), (2, len(r)))
                rhs = np.einsum("q,cq,qi->ci", wr, wv, pk1)
                coeffs[layout.w_dofs[tri]] = np.linalg.solve(mass, rhs.T).T.ravel()
            if p is not None:
                rhs = np.einsum("q,q,qi->i", wr, np.broadcast_to(p(r, z), r.shape), pk1)
                coeffs[layout.p_dofs[tri]] = np.linalg.solve(mass, rhs)

    coeffs[layout.constrained_dofs] = 0.0
    return coeffs


def _interior_functions() -> List[Tuple[sp.Expr, sp.Expr]]:
    xi, eta = sp.symbols("xi eta")
    g2 = sp.Rational(1, 2) + sp.sqrt(3) / 6
    return [
        ((1 - xi - eta) * g2 * xi, (1 - xi - eta) * (g2 - 1) * eta),
        (xi * (g2 * xi + eta - g2), xi * (g2 - 1) * eta),
        (eta * (g2 - 1) * xi, eta * (xi + g2 * eta - g2)),
    ]


@lru_cache(maxsize=None)
def _mt_terms() -> Tuple[Tuple[Tuple[Tuple[Tuple[int, int, float], ...], ...], ...], Tuple[float, ...]]:
    """Monomial expansions (s, t, coefficient) of every M_T integrand, and the row scales."""
    xi, eta = sp.symbols("xi eta")
    phis = _interior_functions()
    zero = sp.Integer(0)

    def integrand(row: int, col: int) -> sp.Expr:
        phi = phis[col % 3]
        alpha = col < 3
        if row < 4:
            tensor_row, comp = divmod(row, 2)
            return phi[comp] if (tensor_row == 0) == alpha else zero
        comp = row - 4
        return eta * phi[comp] if alpha else -xi * phi[comp]

    rows = []
    for i in range(6):
        cols = []
        for j in range(6):
            poly = sp.Poly(sp.expand(integrand(i, j)), xi, eta)
            cols.append(tuple((int(s), int(t), float(c)) for (s, t), c in poly.terms() if c != 0))
        rows.append(tuple(cols))
    return tuple(rows), (120.0, 120.0, 120.0, 120.0, 360.0, 360.0)


def closed_form_determinant(r1: float, r2: float) -> float:
    return (
        (r1 + r2 + 3.0)
        * (2.0 * r1 + r2 + 5.0)
        * (r1 + 2.0 * r2 + 5.0)
        * (2.0 * r1 + 2.0 * r2 + 5.0)
        * (r1 * r1 + 4.0 * r1 * r2 + r2 * r2 + 10.0 * r1 + 10.0 * r2 + 15.0)
        / 36.0
    )


def mt_matrix_from_rstar(r1: float, r2: float) -> MTResult:
    """
    Interior-moment matrix of the BDM_2 interpolant in terms of (r1*, r2*).

    Columns are the three interior functions in the first stress row followed
    by the same functions in the second row; rows are the four constant-tensor
    moments (scaled by 120) and the two (eta, -xi) (x) e_j moments (scaled by 360).
    """
    terms, scales = _mt_terms()
    matrix = np.zeros((6, 6))
    for i in range(6):
        for j in range(6):
            matrix[i, j] = scales[i] * sum(
                c * exact_weighted_monomial(s, t, r1, r2, True) for s, t, c in terms[i][j]
            )
    return MTResult(
        matrix=matrix,
        determinant=float(np.linalg.det(matrix)),
        closed_form=closed_form_determinant(r1, r2),
    )


def mt_matrix(amap: AffineMap) -> MTResult:
    """
    M_T for a mesh triangle.

    Raises:
        InterpolationError: the triangle touches the axis (r0 = 0)
    """
    if amap.r0 <= AXIS_TOL:
        raise InterpolationError("M_T closed form requires r0 > 0")
    return mt_matrix_from_rstar(*amap.r_star)


def c_identity_residual(
    amap: AffineMap,
    tau: sp.Matrix,
    tau_theta: sp.Expr,
    p: sp.Expr,
    exactness: int = MOMENT_EXACTNESS,
    edge_points: int = EDGE_POINTS,
) -> float:
    """
    |c((tau, tau_theta), p)_T - boundary form| for polynomial inputs in (r, z).

    The left side integrates (tau_12 - tau_21) p r and the wedge of the
    axisymmetric divergence with x_perp; the right side is the edge flux
    against x_perp p r minus tau : (x_perp (x) grad p) r and tau_theta z p.
    """
    tau = sp.Matrix(tau)
    tau_theta = sp.sympify(tau_theta)
    p = sp.sympify(p)
    rdiv1 = R * (sp.diff(tau[0, 0], R) + sp.diff(tau[0, 1], Z)) + tau[0, 0] - tau_theta
    rdiv2 = R * (sp.diff(tau[1, 0], R) + sp.diff(tau[1, 1], Z)) + tau[1, 0]

    lhs_weighted = scalar_function((tau[0, 1] - tau[1, 0]) * p)
    lhs_plain = scalar_function((rdiv1 * Z - rdiv2 * R) * p)
    grad_term = scalar_function(
        Z * (tau[0, 0] * sp.diff(p, R) + tau[0, 1] * sp.diff(p, Z))
        - R * (tau[1, 0] * sp.diff(p, R) + tau[1, 1] * sp.diff(p, Z))
    )
    theta_term = scalar_function(tau_theta * Z * p)
    tau_fn = tensor_function(tau)
    p_fn = scalar_function(p)

    rule = triangle_gauss_rule(min(exactness, MAX_EXACTNESS))
    r, z = amap.to_physical(rule.xi, rule.eta)
    w = rule.weights * amap.det
    lhs = np.sum(w * r * lhs_weighted(r, z)) + np.sum(w * lhs_plain(r, z))

    boundary = 0.0
    edge = edge_gauss_rule(edge_points)
    for e in range(3):
        r_e, z_e, nu = _physical_edge(amap, e, edge.points)
        flux = _tensor_values(tau_fn, r_e, z_e) @ nu
        wedge = flux[:, 0] * z_e - flux[:, 1] * r_e
        boundary += float(np.sum(edge.weights * wedge * p_fn(r_e, z_e) * r_e))

    rhs = boundary - np.sum(w * r * grad_term(r, z)) - np.sum(w * theta_term(r, z))
    return abs(float(lhs - rhs))
