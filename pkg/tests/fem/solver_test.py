"""
Tests for the sparse saddle-point solve and the coupling singular value.
"""

from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest
from scipy.sparse import csr_matrix, diags

from src.fem.assembly import MaterialParams, assemble
from src.fem.mesh import build_unit_square_mesh
from src.fem.solver import RESIDUAL_TOL, SolverError, coupling_singular_value, solve

ZERO_LOAD = SimpleNamespace(f=lambda r, z: np.zeros((2,) + np.shape(r)))
UNIT_LOAD = SimpleNamespace(f=lambda r, z: np.array([np.ones_like(r), -np.ones_like(r)]))


def test_zero_load_gives_zero_solution():
    system = assemble(build_unit_square_mesh(2), 1, MaterialParams(), ZERO_LOAD)
    solution = solve(system)

    np.testing.assert_allclose(solution.coefficients, 0.0)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_solution_blocks_and_stats(k):
    """Test residual, block slicing and zeros on the axis DOFs."""
    system = assemble(build_unit_square_mesh(2), k, MaterialParams(), UNIT_LOAD)
    solution = solve(system)
    layout = solution.layout

    assert solution.stats["residual"] <= RESIDUAL_TOL
    assert solution.stats["free"] == system.size
    assert solution.stats["unknowns"] == layout.n_dofs
    np.testing.assert_allclose(solution.coefficients[layout.constrained_dofs], 0.0)
    assert len(solution.p) == layout.count("p")
    assert len(solution.w) == layout.count("w")
    assert len(solution.sigma_row1) == layout.count("sigma_row1")


def test_empty_row_names_field():
    """Test that an empty row reports the field block it belongs to."""
    system = assemble(build_unit_square_mesh(1), 1, MaterialParams(), UNIT_LOAD)
    keep = np.ones(system.size)
    keep[-1] = 0.0
    mask = diags(keep)
    broken = replace(system, matrix=(mask @ system.matrix @ mask).tocsr())
    broken.matrix.eliminate_zeros()

    with pytest.raises(SolverError) as excinfo:
        solve(broken)
    assert excinfo.value.field == "p"
    assert "p" in str(excinfo.value)


def test_singular_matrix_raises():
    system = assemble(build_unit_square_mesh(1), 1, MaterialParams(), UNIT_LOAD)
    dense = system.matrix.toarray()
    dense[-1, :] = dense[-2, :]
    dense[:, -1] = dense[:, -2]

    with pytest.raises(SolverError):
        solve(replace(system, matrix=csr_matrix(dense)))


def test_coupling_singular_value_stays_bounded():
    """Test that the discrete coupling constant drops by less than half from n = 2 to n = 8."""
    values = []
    for n in (2, 4, 8):
        system = assemble(build_unit_square_mesh(n), 1, MaterialParams(), ZERO_LOAD)
        values.append(coupling_singular_value(system))

    assert all(v > 0.0 for v in values)
    assert values[-1] > 0.5 * values[0]


def test_solution_scales_with_load():
    """Test that multiplying the load by c multiplies every unknown by c."""
    smooth = lambda r, z: np.array([np.sin(r + z), r * z ** 2 - 1.0])
    scaled = SimpleNamespace(f=lambda r, z: 3.7 * smooth(r, z))
    mesh = build_unit_square_mesh(3)
    params = MaterialParams(mu=0.5, lam=1.0, gamma=1.0)

    base = solve(assemble(mesh, 2, params, SimpleNamespace(f=smooth))).coefficients
    result = solve(assemble(mesh, 2, params, scaled)).coefficients

    assert np.max(np.abs(base)) > 0.0
    np.testing.assert_allclose(result, 3.7 * base, rtol=1e-10, atol=1e-10 * np.max(np.abs(base)))
