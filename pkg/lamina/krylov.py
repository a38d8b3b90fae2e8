"""Preconditioned conjugate gradients in a weighted inner product.

Operators and preconditioners are plain callables on arrays, self-adjoint
with respect to ``inner``.
"""
import math
from dataclasses import dataclass

import numpy as np

from lamina.constants import CG_MAX_ITERATIONS, CG_TOLERANCE
from lamina.errors import SolverError


@dataclass
class SolveInfo:
    iterations: int
    residual: float
    converged: bool


def pcg(apply, b, precondition, inner, x0=None, tol=CG_TOLERANCE, maxiter=CG_MAX_ITERATIONS):
    """Solve apply(x) = b. Returns (x, SolveInfo); raises SolverError on non-convergence.

    The residual is measured relative to ||b||.
    """
    xk = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    bnorm = math.sqrt(max(inner(b, b), 0.0))
    if bnorm == 0.0:
        return np.zeros_like(b), SolveInfo(0, 0.0, True)

    rk = b - apply(xk) if x0 is not None else b.copy()
    res = math.sqrt(max(inner(rk, rk), 0.0)) / bnorm
    if res <= tol:
        return xk, SolveInfo(0, res, True)
    zk = precondition(rk)
    dk = zk.copy()
    rz = inner(rk, zk)

    k = 0
    while k < maxiter:
        Adk = apply(dk)
        curvature = inner(dk, Adk)
        if curvature <= 0:
            # Remaining residual lives in the null space of a semidefinite operator
            break
        alpha = rz / curvature
        xk += alpha * dk
        rk -= alpha * Adk
        k += 1

        res = math.sqrt(max(inner(rk, rk), 0.0)) / bnorm
        if res <= tol:
            return xk, SolveInfo(k, res, True)

        zk = precondition(rk)
        rz_new = inner(rk, zk)
        beta = rz_new / rz
        dk = zk + beta * dk
        rz = rz_new

    raise SolverError(
        f"conjugate gradients stopped after {k} iterations at relative residual {res:.3e}",
        residual=res,
        iterations=k,
    )
