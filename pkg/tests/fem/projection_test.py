"""
Tests for the stress interpolants, the BDM_2 moment matrix and the
rotation-form identity.
"""

import numpy as np
import pytest
import sympy as sp

from src.fem.mesh import affine_from_coordinates, build_mesh, build_unit_square_mesh, canonical_affine
from src.fem.projection import (
    G2,
    InterpolationError,
    c_identity_residual,
    closed_form_determinant,
    interpolate_global,
    interpolate_stress,
    mt_matrix,
    mt_matrix_from_rstar,
    projection_residuals,
)
from src.fem.spaces import build_dof_layout, eval_discrete_field, piola, reference_basis
from src.utils.symbolic import R, Z, scalar_function, tensor_function

OFF_AXIS = np.array([[1.0, 0.0], [2.0, 0.0], [1.0, 1.0]])
AXIS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def random_polynomial(rng, degree):
    return sum(
        int(rng.integers(-3, 4)) * R ** a * Z ** b
        for a in range(degree + 1)
        for b in range(degree + 1 - a)
    )


def random_smooth(rng):
    """A polynomial plus small sine and exponential terms, outside every P_k."""
    b1, b2, d1, d2 = (float(v) for v in rng.uniform(-1.0, 1.0, size=4))
    return (
        random_polynomial(rng, 2)
        + float(rng.uniform(-2.0, 2.0)) * sp.sin(b1 * R + b2 * Z)
        + float(rng.uniform(-2.0, 2.0)) * sp.exp(0.5 * (d1 * R + d2 * Z))
    )


def random_triangle(rng):
    """A canonical triangle with every vertex off the axis and no sliver angles."""
    while True:
        vertices = rng.uniform([0.3, -1.0], [2.0, 1.0], size=(3, 2))
        (r0, z0), (r1, z1), (r2, z2) = vertices
        area = 0.5 * abs((r1 - r0) * (z2 - z0) - (r2 - r0) * (z1 - z0))
        longest = max(np.sum((vertices - np.roll(vertices, 1, axis=0)) ** 2, axis=1))
        if area >= 0.1 * longest:
            return canonical_affine(0, build_mesh(vertices, [(0, 1, 2)]))


def interpolant_at(k, amap, result, points):
    basis = reference_basis(k)
    ref_values, ref_divs = basis.tabulate_bdm(points)
    values, _ = piola(amap, ref_values, ref_divs)
    return np.einsum("qsi,ps->qpi", values, result.sigma_coeffs), basis.tabulate_pk(points) @ result.theta_coeffs


@pytest.fixture
def amap():
    return affine_from_coordinates(OFF_AXIS)


@pytest.mark.parametrize("k", [1, 2])
def test_interpolant_reproduces_polynomials(k, amap):
    """Test that tensors in P_k reproduce themselves."""
    rng = np.random.default_rng(k)
    tau = sp.Matrix(2, 2, lambda i, j: random_polynomial(rng, k))
    theta = random_polynomial(rng, k)
    result = interpolate_stress(k, amap, tensor_function(tau), scalar_function(theta))

    points = np.array([[0.1, 0.2], [0.6, 0.3], [0.25, 0.5]])
    pi_tau, pi_theta = interpolant_at(k, amap, result, points)
    r, z = amap.to_physical(points[:, 0], points[:, 1])
    np.testing.assert_allclose(pi_tau, np.moveaxis(tensor_function(tau)(r, z), -1, 0), atol=1e-11)
    np.testing.assert_allclose(pi_theta, scalar_function(theta)(r, z), atol=1e-11)


@pytest.mark.parametrize("k", [1, 2])
def test_projection_conditions(k):
    """Test the orthogonality conditions for 20 non-space inputs per degree on random triangles."""
    rng = np.random.default_rng(10 + k)
    for index in range(20):
        amap = random_triangle(rng)
        make = (lambda: random_polynomial(rng, 3)) if index % 2 else (lambda: random_smooth(rng))
        tau = sp.Matrix(2, 2, lambda i, j: make())
        theta = make()
        tau_fn, theta_fn = tensor_function(tau), scalar_function(theta)
        result = interpolate_stress(k, amap, tau_fn, theta_fn)
        residuals = projection_residuals(k, amap, result, tau_fn, theta_fn)

        assert set(residuals) == {"volume", "edge", "theta"}
        assert max(residuals.values()) <= 1e-9


def test_axis_edge_dofs_are_zero():
    amap = affine_from_coordinates(AXIS)
    tau = tensor_function(sp.Matrix([[1 + R, Z], [R * Z, 2]]))
    result = interpolate_stress(1, amap, tau, scalar_function(R))

    # local edge 1 runs from (0, 1) to (0, 0)
    np.testing.assert_allclose(result.sigma_coeffs[:, 2:4], 0.0)
    assert np.all(np.isfinite(result.as_local_vector()))


def test_unsupported_interpolation_degree(amap):
    tau = tensor_function(sp.eye(2))
    with pytest.raises(InterpolationError):
        interpolate_stress(3, amap, tau, scalar_function(sp.Integer(1)))


def test_determinant_at_origin():
    result = mt_matrix_from_rstar(0.0, 0.0)

    assert result.closed_form == pytest.approx(156.25)
    assert result.determinant == pytest.approx(156.25, rel=1e-10)


def test_determinant_closed_form_value():
    assert closed_form_determinant(1.0, 0.0) == pytest.approx(4 * 7 * 6 * 7 * 26 / 36.0)


def test_numeric_determinant_matches_closed_form():
    """Test the numeric determinant against the closed form for 100 random (r1*, r2*) in [0, 10]^2."""
    rng = np.random.default_rng(100)
    for r1, r2 in rng.uniform(0.0, 10.0, size=(100, 2)):
        result = mt_matrix_from_rstar(r1, r2)
        assert result.determinant == pytest.approx(result.closed_form, rel=1e-10)
        assert result.closed_form > 0.0


def test_moment_matrix_first_row():
    """Test the first row against its worked closed form, with g2 the second edge Gauss point."""
    g2 = G2
    rng = np.random.default_rng(21)
    for r1, r2 in rng.uniform(0.0, 10.0, size=(20, 2)):
        expected = [
            g2 * (2 * r1 + r2 + 5),
            2 * (1 - 2 * g2) * r1 + (2 - 3 * g2) * r2 + 5 * (1 - 2 * g2),
            (g2 - 1) * (2 * r1 + 2 * r2 + 5),
            0.0,
            0.0,
            0.0,
        ]
        np.testing.assert_allclose(mt_matrix_from_rstar(r1, r2).matrix[0], expected, rtol=1e-12, atol=1e-12)


def test_moment_matrix_structure():
    """Test that constant-tensor moments of one row never see the other row."""
    matrix = mt_matrix_from_rstar(0.4, 1.1).matrix

    np.testing.assert_allclose(matrix[0:2, 3:6], 0.0)
    np.testing.assert_allclose(matrix[2:4, 0:3], 0.0)
    np.testing.assert_allclose(matrix[0:2, 0:3], matrix[2:4, 3:6])


def test_moment_matrix_of_mesh_triangle(amap):
    assert mt_matrix(amap).determinant == pytest.approx(closed_form_determinant(1.0, 0.0), rel=1e-10)
    with pytest.raises(InterpolationError):
        mt_matrix(affine_from_coordinates(AXIS))


def test_identity_zero_input(amap):
    assert c_identity_residual(amap, sp.zeros(2, 2), 0, 0) == 0.0


def test_identity_constant_input(amap):
    assert c_identity_residual(amap, sp.eye(2), 1, 1) <= 1e-12


def test_identity_random_polynomials():
    """Test the identity for degree-2 inputs on 50 random off-axis triangles."""
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(50):
        amap = random_triangle(rng)
        tau = sp.Matrix(2, 2, lambda i, j: random_polynomial(rng, 2))
        worst = max(worst, c_identity_residual(amap, tau, random_polynomial(rng, 2), random_polynomial(rng, 2)))
    assert worst <= 1e-10


@pytest.mark.parametrize("k", [1, 2, 3])
def test_global_interpolant_with_default_quadrature(k):
    """Test the global interpolant at its default exactness: finite, and exact for constant stress."""
    layout = build_dof_layout(build_unit_square_mesh(2), k)
    one = lambda r, z: np.ones_like(r)
    tau = lambda r, z: np.array([[0.0 * r, one(r, z)], [0.0 * r, 2.0 * one(r, z)]])
    coeffs = interpolate_global(layout, tau, one, w=lambda r, z: np.array([one(r, z), -one(r, z)]), p=one)

    assert np.all(np.isfinite(coeffs))
    fields = eval_discrete_field(layout, coeffs, 3, (0.25, 0.4))
    np.testing.assert_allclose(fields.sigma[0], [[0.0, 1.0], [0.0, 2.0]], atol=1e-11)
    np.testing.assert_allclose(fields.sigma_theta, [1.0], atol=1e-11)
    np.testing.assert_allclose(fields.p, [1.0], atol=1e-11)
