"""
Element blocks of the stabilized forms a, b, c and global saddle-point assembly.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Protocol, TextIO

import numpy as np
from pydantic import BaseModel, Field, validator
from scipy.sparse import coo_matrix, csr_matrix

from src.fem.mesh import AffineMap, Mesh, canonical_affine
from src.fem.quadrature import QuadratureRule, assembly_exactness, triangle_gauss_rule
from src.fem.spaces import (
    DofLayout,
    ElementBasis,
    ReferenceTables,
    StressTables,
    build_dof_layout,
    stress_tables,
    tabulate,
)
from src.utils.logger import get_logger

logger = get_logger(logger_name=__name__)

# Trace coupling of the compliance tensor uses the 3D factor lambda / (2 mu + m lambda).
TRACE_FACTOR_DIM = 3


class AssemblyError(Exception):
    """Raised when an element integral is not finite or an index is out of range."""
    pass


class MaterialParams(BaseModel):
    mu: float = Field(0.5, description="Lame shear modulus")
    lam: float = Field(1.0, alias="lambda", description="Lame first parameter")
    gamma: float = Field(1.0, description="Grad-div stabilization weight")

    model_config = {
        "populate_by_name": True,
        "frozen": True,
        "json_schema_extra": {"example": {"mu": 0.5, "lambda": 1.0, "gamma": 1.0}},
    }

    @validator("mu")
    def validate_mu(cls, v):
        if v <= 0.0:
            raise ValueError("mu must be positive")
        return v

    @validator("lam", "gamma")
    def validate_non_negative(cls, v):
        if v < 0.0:
            raise ValueError("lambda and gamma must be non-negative")
        return v

    @property
    def trace_factor(self) -> float:
        return self.lam / (2.0 * self.mu + TRACE_FACTOR_DIM * self.lam)


class LoadCase(Protocol):
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ElementBlocks:
    a: np.ndarray  # (ns, ns)
    b: np.ndarray  # (nw, ns)
    c: np.ndarray  # (np, ns)


@dataclass(frozen=True)
class ElementRhs:
    sigma: np.ndarray
    w: np.ndarray
    p: np.ndarray


@dataclass(frozen=True)
class SaddleSystem:
    """Symmetric indefinite system over the free DOFs."""

    matrix: csr_matrix
    rhs: np.ndarray
    layout: DofLayout
    free_dofs: np.ndarray
    full_matrix: csr_matrix
    full_rhs: np.ndarray
    exactness: int

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])


def _displacement_values(tables: ReferenceTables) -> np.ndarray:
    nq, npk1 = tables.pkm1.shape
    values = np.zeros((nq, 2 * npk1, 2))
    values[:, :npk1, 0] = tables.pkm1
    values[:, npk1:, 1] = tables.pkm1
    return values


def _check_finite(name: str, *arrays: np.ndarray) -> None:
    for array in arrays:
        if not np.all(np.isfinite(array)):
            raise AssemblyError(f"Non-finite values in {name}")


def _a_block(st: StressTables, wq: np.ndarray, params: MaterialParams) -> np.ndarray:
    wr = wq * st.r
    frob = np.einsum("q,qsij,qtij->st", wr, st.tensor, st.tensor)
    frob += np.einsum("q,qs,qt->st", wr, st.theta, st.theta)
    trace = st.tensor[:, :, 0, 0] + st.tensor[:, :, 1, 1] + st.theta
    coupled = np.einsum("q,qs,qt->st", wr, trace, trace)
    a = (frob - params.trace_factor * coupled) / (2.0 * params.mu)
    if params.gamma:
        with np.errstate(divide="ignore", invalid="ignore"):
            a = a + params.gamma * np.einsum("q,qsi,qti->st", wq / st.r, st.rdiv, st.rdiv)
    return a


def _c_block(st: StressTables, wq: np.ndarray, q: np.ndarray) -> np.ndarray:
    skew = st.tensor[:, :, 0, 1] - st.tensor[:, :, 1, 0]
    wedge = st.rdiv[:, :, 0] * st.z[:, None] - st.rdiv[:, :, 1] * st.r[:, None]
    return np.einsum("q,qm,qs->ms", wq * st.r, q, skew) + np.einsum("q,qm,qs->ms", wq, q, wedge)


def element_blocks(
    amap: AffineMap,
    basis: ElementBasis,
    params: MaterialParams,
    rule: QuadratureRule,
    tables: Optional[ReferenceTables] = None,
) -> ElementBlocks:
    """
    Element matrices on the unsigned local basis [row 1, row 2, sigma_theta].

    Args:
        amap: Affine map of the triangle
        basis: Reference element basis
        params: Material and stabilization parameters
        rule: Reference triangle rule
        tables: Precomputed reference tabulation for the rule

    Returns:
        ElementBlocks with a (stress x stress), b (w x stress), c (p x stress)
    """
    tables = tables or tabulate(basis, rule.points, rule.weights)
    st = stress_tables(amap, tables)
    wq = tables.weights * amap.det

    a = _a_block(st, wq, params)
    b = np.einsum("q,qsi,qvi->vs", wq, st.rdiv, _displacement_values(tables))
    c = _c_block(st, wq, tables.pkm1)
    _check_finite("element blocks", a, b, c)
    return ElementBlocks(a=a, b=b, c=c)


def element_rhs(
    amap: AffineMap,
    basis: ElementBasis,
    params: MaterialParams,
    case: LoadCase,
    rule: QuadratureRule,
    tables: Optional[ReferenceTables] = None,
) -> ElementRhs:
    """Load vectors gamma (f, div tau), (f, v) and (f wedge x, q), all r-weighted."""
    tables = tables or tabulate(basis, rule.points, rule.weights)
    st = stress_tables(amap, tables)
    wq = tables.weights * amap.det
    wr = wq * st.r

    f = np.asarray(case.f(st.r, st.z), dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    f = np.broadcast_to(f, (2,) + st.r.shape)
    _check_finite("body force", f)

    sigma = params.gamma * np.einsum("q,iq,qsi->s", wq, f, st.rdiv)
    w = np.einsum("q,iq,qvi->v", wr, f, _displacement_values(tables))
    wedge = f[0] * st.z - f[1] * st.r
    p = np.einsum("q,q,qm->m", wr, wedge, tables.pkm1)
    return ElementRhs(sigma=sigma, w=w, p=p)


def assemble(
    mesh: Mesh,
    k: int,
    params: MaterialParams,
    case: LoadCase,
    quadrature_bump: int = 0,
    layout: Optional[DofLayout] = None,
) -> SaddleSystem:
    """
    Assemble the global system [[A, B^T, C^T], [B, 0, 0], [C, 0, 0]] and
    eliminate the constrained axis DOFs.
    """
    layout = layout or build_dof_layout(mesh, k)
    basis = layout.basis
    exactness = assembly_exactness(k, quadrature_bump)
    rule = triangle_gauss_rule(exactness)
    tables = tabulate(basis, rule.points, rule.weights)
    n = layout.n_dofs

    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    data: List[np.ndarray] = []
    rhs = np.zeros(n)

    for t in range(mesh.n_triangles):
        amap = canonical_affine(t, mesh)
        blocks = element_blocks(amap, basis, params, rule, tables)
        loads = element_rhs(amap, basis, params, case, rule, tables)

        gs, signs = layout.stress_dofs[t], layout.stress_signs[t]
        gw, gp = layout.w_dofs[t], layout.p_dofs[t]

        rows.append(np.repeat(gs, len(gs)))
        cols.append(np.tile(gs, len(gs)))
        data.append((signs[:, None] * blocks.a * signs[None, :]).ravel())

        for g_other, block in ((gw, blocks.b), (gp, blocks.c)):
            signed = (block * signs[None, :]).ravel()
            rows.append(np.repeat(g_other, len(gs)))
            cols.append(np.tile(gs, len(g_other)))
            data.append(signed)
            rows.append(np.tile(gs, len(g_other)))
            cols.append(np.repeat(g_other, len(gs)))
            data.append(signed)

        np.add.at(rhs, gs, signs * loads.sigma)
        np.add.at(rhs, gw, loads.w)
        np.add.at(rhs, gp, loads.p)

    row_idx, col_idx = np.concatenate(rows), np.concatenate(cols)
    if row_idx.max() >= n or col_idx.max() >= n:
        raise AssemblyError("Global index out of range")
    full = coo_matrix((np.concatenate(data), (row_idx, col_idx)), shape=(n, n)).tocsr()

    free = layout.free_dofs
    matrix = full[free][:, free].tocsr()
    logger.debug(f"Assembled k={k}: {n} unknowns, {len(free)} free, nnz={matrix.nnz}, exactness={exactness}")
    return SaddleSystem(
        matrix=matrix,
        rhs=rhs[free],
        layout=layout,
        free_dofs=free,
        full_matrix=full,
        full_rhs=rhs,
        exactness=exactness,
    )


def _free_in(system: SaddleSystem, start: int, stop: int) -> np.ndarray:
    free = system.free_dofs
    return np.flatnonzero((free >= start) & (free < stop))


def stress_block(system: SaddleSystem) -> csr_matrix:
    """The a-form block restricted to the free stress DOFs."""
    idx = _free_in(system, 0, system.layout.n_stress)
    return system.matrix[idx][:, idx].tocsr()


def coupling_block(system: SaddleSystem) -> csr_matrix:
    """The b-form block: rows w DOFs, columns free stress DOFs."""
    layout = system.layout
    s_idx = _free_in(system, 0, layout.n_stress)
    w_idx = _free_in(system, *layout.offsets["w"])
    return system.matrix[w_idx][:, s_idx].tocsr()


def sigma_norm_matrix(layout: DofLayout, rule: QuadratureRule) -> csr_matrix:
    """Gram matrix of the weighted Sigma-norm on the free stress DOFs."""
    basis, mesh = layout.basis, layout.mesh
    tables = tabulate(basis, rule.points, rule.weights)
    n = layout.n_stress
    rows, cols, data = [], [], []
    for t in range(mesh.n_triangles):
        amap = canonical_affine(t, mesh)
        st = stress_tables(amap, tables)
        wq = tables.weights * amap.det
        wr = wq * st.r
        gram = np.einsum("q,qsij,qtij->st", wr, st.tensor, st.tensor)
        gram += np.einsum("q,qs,qt->st", wr, st.theta, st.theta)
        gram += np.einsum("q,qsi,qti->st", wq / st.r, st.rdiv, st.rdiv)
        _check_finite("Sigma-norm Gram matrix", gram)
        gs, signs = layout.stress_dofs[t], layout.stress_signs[t]
        rows.append(np.repeat(gs, len(gs)))
        cols.append(np.tile(gs, len(gs)))
        data.append((signs[:, None] * gram * signs[None, :]).ravel())
    full = coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)).tocsr()
    free = layout.free_dofs
    free = free[free < n]
    return full[free][:, free].tocsr()


def displacement_mass_matrix(layout: DofLayout, rule: QuadratureRule) -> csr_matrix:
    """Weighted L2 Gram matrix of the w space."""
    basis, mesh = layout.basis, layout.mesh
    tables = tabulate(basis, rule.points, rule.weights)
    values = _displacement_values(tables)
    start, stop = layout.offsets["w"]
    rows, cols, data = [], [], []
    for t in range(mesh.n_triangles):
        amap = canonical_affine(t, mesh)
        r, _ = amap.to_physical(rule.xi, rule.eta)
        mass = np.einsum("q,qvi,qui->vu", tables.weights * amap.det * r, values, values)
        g = layout.w_dofs[t] - start
        rows.append(np.repeat(g, len(g)))
        cols.append(np.tile(g, len(g)))
        data.append(mass.ravel())
    size = stop - start
    return coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)).tocsr()


def dump_matrix(system: SaddleSystem, stream: TextIO) -> None:
    """Write the free-DOF matrix in coordinate text format 'i j value'."""
    coo = system.matrix.tocoo()
    for i, j, v in zip(coo.row, coo.col, coo.data):
        stream.write(f"{i} {j} {v!r}\n")
