"""
Reference BDM_k and P_k bases, the Piola transform and global DOF numbering.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Tuple

import numpy as np
from numpy.polynomial import polynomial as P

from src.fem.mesh import LOCAL_EDGES, AffineMap, EdgeTag, Mesh, canonical_affine
from src.fem.quadrature import edge_gauss_rule, triangle_gauss_rule
from src.utils.logger import get_logger

logger = get_logger(logger_name=__name__)

SUPPORTED_DEGREES = (1, 2, 3)
FIELDS = ("sigma_row1", "sigma_row2", "sigma_theta", "w", "p")

REFERENCE_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


class BasisError(Exception):
    """Raised when a reference DOF system cannot be inverted."""
    pass


def monomial_exponents(k: int) -> List[Tuple[int, int]]:
    """Exponents (a, b) of xi^a eta^b with a + b <= k, constant first."""
    return [(a, total - a) for total in range(k + 1) for a in range(total, -1, -1)]


def reference_edge_points(local_edge: int, t: np.ndarray) -> np.ndarray:
    a, b = LOCAL_EDGES[local_edge]
    va, vb = REFERENCE_VERTICES[a], REFERENCE_VERTICES[b]
    return va[None, :] + np.asarray(t)[:, None] * (vb - va)[None, :]


def reference_edge_normal(local_edge: int) -> np.ndarray:
    """Outward normal of a reference edge scaled by its length."""
    a, b = LOCAL_EDGES[local_edge]
    tangent = REFERENCE_VERTICES[b] - REFERENCE_VERTICES[a]
    return np.array([tangent[1], -tangent[0]])


def _scalar_coeffs(k: int, exponents: List[Tuple[int, int]]) -> np.ndarray:
    coeffs = np.zeros((len(exponents), k + 1, k + 1))
    for i, (a, b) in enumerate(exponents):
        coeffs[i, a, b] = 1.0
    return coeffs


def _pad(c: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros((size, size))
    out[: c.shape[0], : c.shape[1]] = c
    return out


def evaluate_scalar(coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate a stack of (n, d, d) coefficient arrays at (nq, 2) points -> (nq, n)."""
    d = coeffs.shape[-1] - 1
    vander = P.polyvander2d(points[:, 0], points[:, 1], [d, d])
    return vander @ coeffs.reshape(coeffs.shape[0], -1).T


@dataclass(frozen=True)
class ElementBasis:
    """Reference BDM_k vector basis with the scalar P_k and P_{k-1} bases."""

    degree: int
    bdm_coeffs: np.ndarray  # (nb, 2, k+1, k+1)
    bdm_div_coeffs: np.ndarray  # (nb, k+1, k+1)
    pk_coeffs: np.ndarray  # (npk, k+1, k+1)
    pkm1_coeffs: np.ndarray  # (npk1, k+1, k+1)
    edge_points: np.ndarray  # Gauss points on (0, 1)
    edge_dof_table: Dict[Tuple[int, int], int] = field(default_factory=dict)
    dof_matrix: np.ndarray = field(default=None, repr=False)
    condition_number: float = 0.0

    @property
    def n_bdm(self) -> int:
        return int(self.bdm_coeffs.shape[0])

    @property
    def n_edge_dofs(self) -> int:
        return 3 * (self.degree + 1)

    @property
    def n_interior(self) -> int:
        return self.n_bdm - self.n_edge_dofs

    @property
    def n_pk(self) -> int:
        return int(self.pk_coeffs.shape[0])

    @property
    def n_pkm1(self) -> int:
        return int(self.pkm1_coeffs.shape[0])

    @property
    def n_stress_local(self) -> int:
        return 2 * self.n_bdm + self.n_pk

    def tabulate_bdm(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Reference values (nq, nb, 2) and divergences (nq, nb)."""
        nb, k = self.n_bdm, self.degree
        flat = self.bdm_coeffs.reshape(nb * 2, k + 1, k + 1)
        values = evaluate_scalar(flat, points).reshape(len(points), nb, 2)
        divs = evaluate_scalar(self.bdm_div_coeffs, points)
        return values, divs

    def tabulate_pk(self, points: np.ndarray) -> np.ndarray:
        return evaluate_scalar(self.pk_coeffs, points)

    def tabulate_pkm1(self, points: np.ndarray) -> np.ndarray:
        return evaluate_scalar(self.pkm1_coeffs, points)


def interior_test_functions(k: int) -> List[Tuple[int, int, int]]:
    """
    Interior moment test functions as (kind, a, b):
    kind 0/1 is xi^a eta^b in component 0/1, kind 2 is xi^a eta^b (-eta, xi).
    """
    if k < 2:
        return []
    tests = []
    for a, b in monomial_exponents(k - 2):
        tests.append((0, a, b))
        tests.append((1, a, b))
    for a in range(k - 2, -1, -1):
        tests.append((2, a, k - 2 - a))
    return tests


def _functional_matrix(k: int, edge_points: np.ndarray) -> np.ndarray:
    exps = monomial_exponents(k)
    n_scalar = len(exps)
    n = 2 * n_scalar
    coeffs = _scalar_coeffs(k, exps)
    rows = []

    for e in range(3):
        nu = reference_edge_normal(e)
        pts = reference_edge_points(e, edge_points)
        vals = evaluate_scalar(coeffs, pts)
        for j in range(len(edge_points)):
            rows.append(np.concatenate([nu[0] * vals[j], nu[1] * vals[j]]))

    rule = triangle_gauss_rule(2 * k)
    vals = evaluate_scalar(coeffs, rule.points)
    xi, eta = rule.xi, rule.eta
    for kind, a, b in interior_test_functions(k):
        m = xi ** a * eta ** b
        if kind == 0:
            m0, m1 = m, np.zeros_like(m)
        elif kind == 1:
            m0, m1 = np.zeros_like(m), m
        else:
            m0, m1 = -eta * m, xi * m
        rows.append(np.concatenate([rule.weights * m0 @ vals, rule.weights * m1 @ vals]))

    matrix = np.array(rows)
    if matrix.shape != (n, n):
        raise BasisError(f"DOF system for k={k} has shape {matrix.shape}, expected {(n, n)}")
    return matrix


@lru_cache(maxsize=None)
def reference_basis(k: int) -> ElementBasis:
    """
    Build the reference BDM_k basis dual to edge normal values at the k+1
    Gauss points of each edge and interior moments.

    Raises:
        BasisError: unsupported degree or singular DOF system
    """
    if k not in SUPPORTED_DEGREES:
        raise BasisError(f"Unsupported degree {k}, expected one of {SUPPORTED_DEGREES}")

    edge_points = edge_gauss_rule(k + 1).points
    matrix = _functional_matrix(k, edge_points)
    cond = float(np.linalg.cond(matrix))
    if not np.isfinite(cond) or cond > 1e12:
        raise BasisError(f"Singular DOF system for k={k} (condition {cond:.3e})")
    inverse = np.linalg.solve(matrix, np.eye(matrix.shape[0]))

    exps = monomial_exponents(k)
    n_scalar = len(exps)
    nb = 2 * n_scalar
    bdm = np.zeros((nb, 2, k + 1, k + 1))
    div = np.zeros((nb, k + 1, k + 1))
    for i in range(nb):
        for m, (a, b) in enumerate(exps):
            bdm[i, 0, a, b] = inverse[m, i]
            bdm[i, 1, a, b] = inverse[n_scalar + m, i]
        div[i] = _pad(P.polyder(bdm[i, 0], axis=0), k + 1) + _pad(P.polyder(bdm[i, 1], axis=1), k + 1)

    table = {(e, j): e * (k + 1) + j for e in range(3) for j in range(k + 1)}
    logger.debug(f"Reference BDM_{k}: {nb} functions, DOF condition {cond:.2e}")
    return ElementBasis(
        degree=k,
        bdm_coeffs=bdm,
        bdm_div_coeffs=div,
        pk_coeffs=_scalar_coeffs(k, exps),
        pkm1_coeffs=_scalar_coeffs(k, monomial_exponents(k - 1)),
        edge_points=edge_points,
        edge_dof_table=table,
        dof_matrix=matrix,
        condition_number=cond,
    )


def piola(amap: AffineMap, ref_value: np.ndarray, ref_div: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Contravariant Piola map: J v / det and div / det. ref_value has trailing axis 2."""
    value = np.einsum("ij,...j->...i", amap.jacobian, np.asarray(ref_value, dtype=float)) / amap.det
    return value, np.asarray(ref_div, dtype=float) / amap.det


@dataclass(frozen=True)
class ReferenceTables:
    """Basis values at a fixed set of reference points, shared by all elements."""

    points: np.ndarray
    weights: np.ndarray
    bdm_values: np.ndarray
    bdm_divs: np.ndarray
    pk: np.ndarray
    pkm1: np.ndarray


def tabulate(basis: ElementBasis, points: np.ndarray, weights: np.ndarray = None) -> ReferenceTables:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    values, divs = basis.tabulate_bdm(points)
    return ReferenceTables(
        points=points,
        weights=np.ones(len(points)) if weights is None else weights,
        bdm_values=values,
        bdm_divs=divs,
        pk=basis.tabulate_pk(points),
        pkm1=basis.tabulate_pkm1(points),
    )


@dataclass(frozen=True)
class StressTables:
    """
    Physical values of the local stress functions ordered as
    [row 1 BDM, row 2 BDM, sigma_theta P_k].
    rdiv holds r times the axisymmetric divergence, finite on the axis.
    """

    r: np.ndarray
    z: np.ndarray
    tensor: np.ndarray  # (nq, ns, 2, 2)
    theta: np.ndarray  # (nq, ns)
    rdiv: np.ndarray  # (nq, ns, 2)


def stress_tables(amap: AffineMap, tables: ReferenceTables) -> StressTables:
    nq, nb = tables.bdm_divs.shape
    npk = tables.pk.shape[1]
    ns = 2 * nb + npk
    r, z = amap.to_physical(tables.points[:, 0], tables.points[:, 1])
    values, divs = piola(amap, tables.bdm_values, tables.bdm_divs)

    tensor = np.zeros((nq, ns, 2, 2))
    theta = np.zeros((nq, ns))
    rdiv = np.zeros((nq, ns, 2))

    tensor[:, :nb, 0, :] = values
    tensor[:, nb : 2 * nb, 1, :] = values
    theta[:, 2 * nb :] = tables.pk

    rdiv[:, :nb, 0] = r[:, None] * divs + values[:, :, 0]
    rdiv[:, nb : 2 * nb, 1] = r[:, None] * divs + values[:, :, 0]
    rdiv[:, 2 * nb :, 0] = -tables.pk
    return StressTables(r=r, z=z, tensor=tensor, theta=theta, rdiv=rdiv)


@dataclass(frozen=True)
class DofLayout:
    """Global numbering of ((sigma, sigma_theta), w, p) with axis constraints."""

    mesh: Mesh
    basis: ElementBasis
    offsets: Dict[str, Tuple[int, int]]
    stress_dofs: np.ndarray  # (nt, ns)
    stress_signs: np.ndarray  # (nt, ns)
    w_dofs: np.ndarray  # (nt, 2 * npk1)
    p_dofs: np.ndarray  # (nt, npk1)
    constrained_dofs: np.ndarray

    @property
    def degree(self) -> int:
        return self.basis.degree

    @property
    def n_dofs(self) -> int:
        return self.offsets["p"][1]

    @property
    def n_stress(self) -> int:
        return self.offsets["sigma_theta"][1]

    def count(self, name: str) -> int:
        start, stop = self.offsets[name]
        return stop - start

    @property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.constrained_dofs] = False
        return np.flatnonzero(mask)

    def field_of(self, dof: int) -> str:
        for name in FIELDS:
            start, stop = self.offsets[name]
            if start <= dof < stop:
                return name
        raise IndexError(f"DOF {dof} out of range 0..{self.n_dofs - 1}")

    def edge_dofs(self, edge: int, row: int) -> np.ndarray:
        """Global DOFs of a mesh edge in stress row 0 or 1, ordered along lower->higher vertex."""
        start = self.offsets[FIELDS[row]][0]
        kp1 = self.degree + 1
        return start + edge * kp1 + np.arange(kp1)


def build_dof_layout(mesh: Mesh, k: int) -> DofLayout:
    """Number all unknowns; axis-edge normal DOFs of both stress rows are constrained."""
    basis = reference_basis(k)
    nt, ne = mesh.n_triangles, mesh.n_edges
    kp1 = k + 1
    nb, n_int, npk, npk1 = basis.n_bdm, basis.n_interior, basis.n_pk, basis.n_pkm1

    row_size = kp1 * ne + n_int * nt
    sizes = {
        "sigma_row1": row_size,
        "sigma_row2": row_size,
        "sigma_theta": npk * nt,
        "w": 2 * npk1 * nt,
        "p": npk1 * nt,
    }
    offsets, start = {}, 0
    for name in FIELDS:
        offsets[name] = (start, start + sizes[name])
        start += sizes[name]

    ns = 2 * nb + npk
    stress_dofs = np.zeros((nt, ns), dtype=np.int64)
    stress_signs = np.ones((nt, ns))
    for t in range(nt):
        for row in range(2):
            row_start = offsets[FIELDS[row]][0]
            base = row * nb
            for e in range(3):
                edge = mesh.triangle_edges[t, e]
                orient = mesh.edge_orientation(t, e)
                for j in range(kp1):
                    j_global = j if orient > 0 else k - j
                    stress_dofs[t, base + e * kp1 + j] = row_start + edge * kp1 + j_global
                    stress_signs[t, base + e * kp1 + j] = orient
            interior = row_start + kp1 * ne + t * n_int + np.arange(n_int)
            stress_dofs[t, base + 3 * kp1 : base + nb] = interior
        stress_dofs[t, 2 * nb :] = offsets["sigma_theta"][0] + t * npk + np.arange(npk)

    w_dofs = offsets["w"][0] + np.arange(nt)[:, None] * 2 * npk1 + np.arange(2 * npk1)[None, :]
    p_dofs = offsets["p"][0] + np.arange(nt)[:, None] * npk1 + np.arange(npk1)[None, :]

    constrained = []
    for e, tag in enumerate(mesh.boundary_tags):
        if tag is EdgeTag.AXIS:
            for row in range(2):
                constrained.extend(offsets[FIELDS[row]][0] + e * kp1 + np.arange(kp1))

    layout = DofLayout(
        mesh=mesh,
        basis=basis,
        offsets=offsets,
        stress_dofs=stress_dofs,
        stress_signs=stress_signs,
        w_dofs=w_dofs,
        p_dofs=p_dofs,
        constrained_dofs=np.array(sorted(constrained), dtype=np.int64),
    )
    logger.debug(f"DOF layout k={k}: {layout.n_dofs} unknowns, {len(constrained)} constrained")
    return layout


@dataclass(frozen=True)
class FieldValues:
    """Discrete fields at a set of points of one element."""

    r: np.ndarray
    z: np.ndarray
    sigma: np.ndarray  # (nq, 2, 2)
    sigma_theta: np.ndarray  # (nq,)
    div_axi: np.ndarray  # (nq, 2)
    w: np.ndarray  # (nq, 2)
    p: np.ndarray  # (nq,)

    @property
    def displacement(self) -> np.ndarray:
        """Recovered u = w + x_perp p with x_perp = (z, -r)."""
        return np.column_stack([self.w[:, 0] + self.z * self.p, self.w[:, 1] - self.r * self.p])


def _over_r(numerator: np.ndarray, r: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(numerator == 0.0, 0.0, numerator / r)


def local_stress_coefficients(layout: DofLayout, coeffs: np.ndarray, tri: int) -> np.ndarray:
    """Unsigned local coefficients [row 1, row 2, theta] of element tri."""
    return coeffs[layout.stress_dofs[tri]] * layout.stress_signs[tri]


def evaluate_fields(layout: DofLayout, coeffs: np.ndarray, tri: int, tables: ReferenceTables) -> FieldValues:
    amap = canonical_affine(tri, layout.mesh)
    basis = layout.basis
    nb, npk1 = basis.n_bdm, basis.n_pkm1
    st = stress_tables(amap, tables)
    loc = local_stress_coefficients(layout, coeffs, tri)

    sigma = np.einsum("qsij,s->qij", st.tensor, loc)
    theta = st.theta @ loc

    _, divs = piola(amap, tables.bdm_values, tables.bdm_divs)
    cart = np.column_stack([divs @ loc[:nb], divs @ loc[nb : 2 * nb]])
    div_axi = cart + np.column_stack(
        [_over_r(sigma[:, 0, 0] - theta, st.r), _over_r(sigma[:, 1, 0], st.r)]
    )

    wc = coeffs[layout.w_dofs[tri]].reshape(2, npk1)
    w = tables.pkm1 @ wc.T
    p = tables.pkm1 @ coeffs[layout.p_dofs[tri]]
    return FieldValues(r=st.r, z=st.z, sigma=sigma, sigma_theta=theta, div_axi=div_axi, w=w, p=p)


def eval_discrete_field(layout: DofLayout, coeffs: np.ndarray, tri: int, ref_point: Tuple[float, float]) -> FieldValues:
    """
    Evaluate sigma, sigma_theta, the axisymmetric divergence, w and p at one
    reference point of a triangle. On the axis a nonzero 1/r numerator gives inf.
    """
    tables = tabulate(layout.basis, np.array([ref_point], dtype=float))
    return evaluate_fields(layout, np.asarray(coeffs, dtype=float), tri, tables)
