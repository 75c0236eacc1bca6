"""
Manufactured solutions for the convergence experiments.
Experiment 1 carries the printed polynomial stresses; experiment 2 derives
stress and load from the displacement symbolically.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np
import sympy as sp

from src.fem.assembly import MaterialParams
from src.utils.logger import get_logger
from src.utils.symbolic import R, Z, scalar_function, tensor_function, vector_function

logger = get_logger(logger_name=__name__)

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]

CASE_IDS = ("exp1", "exp2")
FD_STEP = 1e-3


@dataclass(frozen=True)
class ManufacturedCase:
    """Exact fields of one experiment as vectorized functions of (r, z)."""

    case_id: str
    params: MaterialParams
    u: Field  # (2, nq)
    sigma: Field  # (2, 2, nq)
    sigma_theta: Field
    p: Field
    f: Field  # (2, nq), axisymmetric divergence of (sigma, sigma_theta)
    w: Field  # (2, nq), u - x_perp p
    strain: Field  # (2, 2, nq)
    strain_theta: Field
    expressions: Dict[str, sp.Basic] = field(default_factory=dict, repr=False)
    notes: str = ""


def _displacement(case_id: str):
    if case_id == "exp1":
        g = 4 * R ** 3 * (1 - R) * Z * (1 - Z)
    else:
        g = R ** 3 * sp.sin(sp.pi * R) * sp.cos((Z - sp.Rational(1, 2)) * sp.pi)
    return g, -g


def _printed_exp1():
    """Stresses and load of experiment 1 for mu = 1/2, lambda = 1."""
    s11 = 4 * R**2 * (-2 * R**2 * Z + R**2 + 9 * R * Z**2 - 7 * R * Z - R - 7 * Z**2 + 7 * Z)
    s12 = 2 * R**2 * (2 * R**2 * Z - R**2 - 4 * R * Z**2 + 2 * R * Z + R + 3 * Z**2 - 3 * Z)
    s22 = 4 * R**2 * (-4 * R**2 * Z + 2 * R**2 + 5 * R * Z**2 - R * Z - 2 * R - 4 * Z**2 + 4 * Z)
    s_theta = 4 * R**2 * (-2 * R**2 * Z + R**2 + 6 * R * Z**2 - 4 * R * Z - R - 5 * Z**2 + 5 * Z)
    f1 = 2 * R * (2 * R**3 - 24 * R**2 * Z + 10 * R**2 + 60 * R * Z**2 - 42 * R * Z - 9 * R - 32 * Z**2 + 32 * Z)
    f2 = -2 * R * (8 * R**3 + R**2 * (7 - 30 * Z) + 4 * R * (4 * Z**2 + 2 * Z - 3) - 9 * (Z - 1) * Z)
    return sp.Matrix([[s11, s12], [s12, s22]]), s_theta, sp.Matrix([f1, f2])


def axisymmetric_strain(u_r: sp.Expr, u_z: sp.Expr):
    """Meridian strain tensor and hoop strain u_r / r."""
    e12 = (sp.diff(u_r, Z) + sp.diff(u_z, R)) / 2
    strain = sp.Matrix([[sp.diff(u_r, R), e12], [e12, sp.diff(u_z, Z)]])
    return strain, u_r / R


def axisymmetric_divergence(sigma: sp.Matrix, sigma_theta: sp.Expr) -> sp.Matrix:
    d1 = sp.diff(sigma[0, 0], R) + sp.diff(sigma[0, 1], Z) + (sigma[0, 0] - sigma_theta) / R
    d2 = sp.diff(sigma[1, 0], R) + sp.diff(sigma[1, 1], Z) + sigma[1, 0] / R
    return sp.Matrix([d1, d2])


def _tidy(expr: sp.Expr) -> sp.Expr:
    cancelled = sp.cancel(expr)
    return cancelled if cancelled.is_polynomial(R, Z) else expr


def stress_from_strain(strain: sp.Matrix, strain_theta: sp.Expr, params: MaterialParams):
    """Isotropic 3D law restricted to the meridian plane: 2 mu eps + lambda tr(eps) I."""
    mu, lam = sp.nsimplify(params.mu), sp.nsimplify(params.lam)
    trace = strain[0, 0] + strain[1, 1] + strain_theta
    sigma = 2 * mu * strain + lam * trace * sp.eye(2)
    return sigma, 2 * mu * strain_theta + lam * trace


def manufactured_case(case_id: str, params: Optional[MaterialParams] = None) -> ManufacturedCase:
    """
    Build the exact fields of an experiment.

    Experiment 1 uses the printed closed forms for the default material
    (mu = 1/2, lambda = 1) and the symbolic derivation otherwise.

    Raises:
        ValueError: unknown case id
    """
    if case_id not in CASE_IDS:
        raise ValueError(f"Unknown manufactured case {case_id!r}, expected one of {CASE_IDS}")
    params = params or MaterialParams()

    u_r, u_z = _displacement(case_id)
    strain, strain_theta = axisymmetric_strain(u_r, u_z)
    printed = case_id == "exp1" and params.mu == 0.5 and params.lam == 1.0
    if printed:
        sigma, sigma_theta, f = _printed_exp1()
        notes = "polynomial, printed closed forms"
    else:
        sigma, sigma_theta = stress_from_strain(strain, strain_theta, params)
        f = axisymmetric_divergence(sigma, sigma_theta).applyfunc(_tidy)
        notes = "polynomial, derived" if case_id == "exp1" else "smooth non-polynomial, derived"

    p = (sp.diff(u_r, Z) - sp.diff(u_z, R)) / 2
    w = sp.Matrix([u_r - Z * p, u_z + R * p])

    logger.debug(f"Manufactured case {case_id} ({notes}) for mu={params.mu}, lambda={params.lam}")
    return ManufacturedCase(
        case_id=case_id,
        params=params,
        u=vector_function([u_r, u_z]),
        sigma=tensor_function(sigma),
        sigma_theta=scalar_function(sigma_theta),
        p=scalar_function(p),
        f=vector_function(list(f)),
        w=vector_function(list(w)),
        strain=tensor_function(strain),
        strain_theta=scalar_function(strain_theta),
        expressions={
            "u": sp.Matrix([u_r, u_z]),
            "sigma": sigma,
            "sigma_theta": sigma_theta,
            "p": p,
            "f": f,
        },
        notes=notes,
    )


def constitutive_residual(case: ManufacturedCase, params: MaterialParams, r: np.ndarray, z: np.ndarray) -> float:
    """Max |A(sigma, sigma_theta) - eps_axi(u)| over the sample points (r > 0)."""
    r, z = np.asarray(r, dtype=float), np.asarray(z, dtype=float)
    sigma, theta = case.sigma(r, z), case.sigma_theta(r, z)
    c = params.trace_factor
    trace = sigma[0, 0] + sigma[1, 1] + theta
    compliance = (sigma - c * trace * np.eye(2)[:, :, None]) / (2.0 * params.mu)
    compliance_theta = (theta - c * trace) / (2.0 * params.mu)
    return float(
        max(
            np.max(np.abs(compliance - case.strain(r, z))),
            np.max(np.abs(compliance_theta - case.strain_theta(r, z))),
        )
    )


def finite_difference_divergence(case: ManufacturedCase, r: np.ndarray, z: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Fourth-order central differences of the axisymmetric divergence, shape (2, nq)."""
    r, z = np.asarray(r, dtype=float), np.asarray(z, dtype=float)

    def d(fn, dr, dz):
        return (
            -fn(r + 2 * dr, z + 2 * dz) + 8 * fn(r + dr, z + dz) - 8 * fn(r - dr, z - dz) + fn(r - 2 * dr, z - 2 * dz)
        ) / (12.0 * step)

    d_dr = d(case.sigma, step, 0.0)
    d_dz = d(case.sigma, 0.0, step)
    sigma, theta = case.sigma(r, z), case.sigma_theta(r, z)
    return np.stack(
        [
            d_dr[0, 0] + d_dz[0, 1] + (sigma[0, 0] - theta) / r,
            d_dr[1, 0] + d_dz[1, 1] + sigma[1, 0] / r,
        ]
    )
