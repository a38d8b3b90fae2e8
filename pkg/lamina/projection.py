"""Helmholtz-Leray and B-weighted projections.

Both solve for a potential p with the weak divergence of the grid, so the output
q = f - B^T grad p satisfies <B q, grad r> = 0 for every grid function r:
B q is weakly divergence free with zero normal flux. With ``no_slip`` the
correction is applied at interior nodes only, which keeps wall values fixed.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from lamina.constants import CG_TOLERANCE
from lamina.errors import GridMismatchError
from lamina.fields import Field, Grid, grad, inner, norm, weak_divergence
from lamina.geometry import FlatteningMap, TransformMatrices, matrices_at
from lamina.krylov import SolveInfo, pcg

NULL_TOLERANCE = 1e-14


@dataclass(frozen=True, eq=False)
class WallSlopes:
    """Third row of B on the grid: B = I + e3 (b31, b32, 0). Arrays shaped (n1, n2, 1)."""

    b31: np.ndarray
    b32: np.ndarray

    @classmethod
    def identity(cls, grid: Grid) -> "WallSlopes":
        zero = np.zeros((grid.n1, grid.n2, 1))
        return cls(zero, zero)

    @classmethod
    def from_matrices(cls, B: TransformMatrices, grid: Grid) -> "WallSlopes":
        b31 = np.asarray(B.B[2, 0], float)
        b32 = np.asarray(B.B[2, 1], float)
        if b31.shape != (grid.n1, grid.n2):
            raise GridMismatchError(
                f"matrices sampled on {b31.shape}, grid needs {(grid.n1, grid.n2)}"
            )
        return cls(b31[:, :, None], b32[:, :, None])

    @classmethod
    def from_map(cls, fmap: FlatteningMap, grid: Grid) -> "WallSlopes":
        y1, y2 = np.meshgrid(grid.x1, grid.x2, indexing="ij")
        return cls.from_matrices(matrices_at(fmap, np.stack([y1, y2])), grid)

    @property
    def is_identity(self) -> bool:
        return not (np.any(self.b31) or np.any(self.b32))

    def apply(self, u: np.ndarray) -> np.ndarray:
        """B u for u shaped (3, n1, n2, n3)."""
        out = u.copy()
        out[2] = u[2] + self.b31 * u[0] + self.b32 * u[1]
        return out

    def apply_transpose(self, v: np.ndarray) -> np.ndarray:
        """B^T v"""
        out = v.copy()
        out[0] = v[0] + self.b31 * v[2]
        out[1] = v[1] + self.b32 * v[2]
        return out


def interior_mask(grid: Grid) -> np.ndarray:
    mask = np.ones(grid.n3)
    mask[0] = mask[-1] = 0.0
    return mask


class Projector:
    """Solves div(B M B^T grad p) = div(B f) by PCG, M the optional wall mask.

    The preconditioner inverts the flat operator |k|^2 + E exactly, E the
    vertical part diagonalized once per grid.
    """

    def __init__(self, grid: Grid, slopes: Optional[WallSlopes] = None, no_slip: bool = False, tol=CG_TOLERANCE):
        self.grid = grid
        self.slopes = WallSlopes.identity(grid) if slopes is None else slopes
        self.no_slip = no_slip
        self.tol = tol
        self.mask = interior_mask(grid) if no_slip else np.ones(grid.n3)
        self.last_info: Optional[SolveInfo] = None

        w = grid.weights3
        d3 = grid.d3.toarray()
        stiffness = d3.T @ ((w * self.mask)[:, None] * d3)
        lam, vecs = scipy.linalg.eigh(stiffness, np.diag(w))
        self._vecs = vecs
        self._wvecs = w[:, None] * vecs
        kk = grid.k1[:, None] ** 2 + grid.kr2[None, :] ** 2
        denom = kk[:, :, None] + lam[None, None, :]
        null = np.abs(denom) <= NULL_TOLERANCE * np.max(np.abs(lam))
        self._inverse = np.where(null, 0.0, 1.0 / np.where(null, 1.0, denom))

    def inner(self, a, b) -> float:
        return inner(a, b, self.grid)

    def correction(self, p: np.ndarray) -> np.ndarray:
        """M B^T grad p"""
        return self.slopes.apply_transpose(grad(p, self.grid)) * self.mask

    def operator(self, p: np.ndarray) -> np.ndarray:
        return -weak_divergence(self.slopes.apply(self.correction(p)), self.grid)

    def precondition(self, r: np.ndarray) -> np.ndarray:
        n1, n2 = self.grid.n1, self.grid.n2
        hat = np.fft.rfftn(r, axes=(0, 1))
        coeff = (hat @ self._wvecs) * self._inverse
        return np.fft.irfftn(coeff @ self._vecs.T, s=(n1, n2), axes=(0, 1))

    def divergence(self, u: np.ndarray) -> np.ndarray:
        """Weak divergence of B u."""
        return weak_divergence(self.slopes.apply(u), self.grid)

    def potential(self, u: np.ndarray, p0=None) -> np.ndarray:
        rhs = -self.divergence(u)
        p, info = pcg(self.operator, rhs, self.precondition, self.inner, x0=p0, tol=self.tol)
        self.last_info = info
        return p

    def project(self, u: np.ndarray, p0=None):
        """(projected u, potential)"""
        p = self.potential(u, p0)
        return u - self.correction(p), p


def _vector(f: Field):
    if f.components != 3:
        raise GridMismatchError("projection needs a vector field")
    return f.data


def leray_project(f: Field) -> Field:
    """f - grad q0 with q0 the discrete Poisson-Neumann potential."""
    out, _ = Projector(f.grid).project(_vector(f))
    return f.with_data(out)


def b_weighted_project(f: Field, B: TransformMatrices, no_slip: bool = False) -> Field:
    """f - B^T grad p with div(B (f - B^T grad p)) = 0. B sampled on the grid's x' nodes."""
    slopes = WallSlopes.from_matrices(B, f.grid)
    out, _ = Projector(f.grid, slopes, no_slip=no_slip).project(_vector(f))
    return f.with_data(out)


def b_divergence(f: Field, slopes: Optional[WallSlopes] = None) -> Field:
    slopes = WallSlopes.identity(f.grid) if slopes is None else slopes
    return f.with_data(weak_divergence(slopes.apply(_vector(f)), f.grid)[None])


def boundedness_ratio(f: Field, projected: Field, order: int = 1) -> float:
    """||P f||_{H^order} / ||f||_{H^order}"""
    kind = "L2" if order == 0 else f"H{order}"
    denom = norm(f, kind)
    return norm(projected, kind) / denom if denom > 0 else 0.0
