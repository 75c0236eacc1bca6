"""
Helpers turning sympy expressions in (r, z) into vectorized numpy callables.
"""

from typing import Callable, Sequence

import numpy as np
import sympy as sp

R, Z = sp.symbols("r z", real=True)

ScalarField = Callable[[np.ndarray, np.ndarray], np.ndarray]


def scalar_function(expr: sp.Expr) -> ScalarField:
    """Lambdify a scalar expression; constants broadcast to the shape of r."""
    fn = sp.lambdify((R, Z), sp.sympify(expr), "numpy")

    def evaluate(r, z):
        r = np.asarray(r, dtype=float)
        return np.broadcast_to(np.asarray(fn(r, np.asarray(z, dtype=float)), dtype=float), r.shape).copy()

    return evaluate


def vector_function(exprs: Sequence[sp.Expr]) -> ScalarField:
    """Lambdify a vector of expressions; values have shape (len(exprs), nq)."""
    parts = [scalar_function(e) for e in exprs]
    return lambda r, z: np.stack([f(r, z) for f in parts])


def tensor_function(matrix: sp.Matrix) -> ScalarField:
    """Lambdify a 2x2 matrix; values have shape (2, 2, nq)."""
    matrix = sp.Matrix(matrix)
    rows = [vector_function(list(matrix.row(i))) for i in range(matrix.rows)]
    return lambda r, z: np.stack([row(r, z) for row in rows])
