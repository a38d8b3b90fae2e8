"""Boundary profile g, the flattening maps and the matrices B, B_g, dg.

The fluid occupies x3 > delta**alpha * g(x'/delta). Psi0 maps the half-space
y3 > 0 onto it and Phi0 is its inverse. Arrays of points are shaped (2, ...)
or (3, ...) with the component axis first, matrices (3, 3, ...).
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RectBivariateSpline

from lamina.constants import L_SAMPLES_PER_PERIOD
from lamina.errors import DomainError, OutOfRangeError, ValidationError

PROFILE_KINDS = ("flat", "cosine", "tabulated")


@dataclass(frozen=True, eq=False)
class BoundaryProfile:
    """The function g with its first and second derivatives.

    ``table`` is only used by the tabulated kind: samples of g on an
    (m+1)x(m+1) grid covering [0, period]^2, endpoints included.
    """

    kind: str = "flat"
    amplitude: float = 0.0
    period: float = 2 * np.pi
    table: Optional[np.ndarray] = None
    periodic: bool = True
    _spline: Optional[RectBivariateSpline] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise DomainError(f"unknown profile kind '{self.kind}'")
        if not np.isfinite(self.amplitude) or not np.isfinite(self.period):
            raise ValidationError("profile amplitude and period must be finite")
        if self.period <= 0:
            raise ValidationError("profile period must be positive")
        if self.kind == "cosine" and self.amplitude < 0:
            raise ValidationError("cosine profile amplitude must be nonnegative (g >= 0)")
        if self.kind == "tabulated":
            table = np.asarray(self.table, dtype=float)
            if table.ndim != 2 or min(table.shape) < 4:
                raise ValidationError("tabulated profile needs a 2-D table of at least 4x4")
            if not np.all(np.isfinite(table)):
                raise ValidationError("tabulated profile has non-finite entries")
            if table.min() < 0:
                raise ValidationError("tabulated profile must satisfy g >= 0")
            xs = np.linspace(0.0, self.period, table.shape[0])
            ys = np.linspace(0.0, self.period, table.shape[1])
            # Bicubic so that second derivatives exist
            spline = RectBivariateSpline(xs, ys, table, kx=3, ky=3, s=0)
            object.__setattr__(self, "table", table)
            object.__setattr__(self, "_spline", spline)

    @classmethod
    def flat(cls) -> "BoundaryProfile":
        return cls(kind="flat")

    @classmethod
    def cosine(cls, amplitude: float = 1.0, period: float = 2 * np.pi) -> "BoundaryProfile":
        return cls(kind="cosine", amplitude=amplitude, period=period)

    @classmethod
    def tabulated(cls, table, period: float, periodic: bool = True) -> "BoundaryProfile":
        return cls(kind="tabulated", table=np.asarray(table, float), period=period, periodic=periodic)

    @property
    def wavenumber(self) -> float:
        return 2 * np.pi / self.period

    def _table_args(self, x1, x2):
        if self.periodic:
            return np.mod(x1, self.period), np.mod(x2, self.period)
        outside = (x1 < 0) | (x1 > self.period) | (x2 < 0) | (x2 > self.period)
        if np.any(outside):
            raise OutOfRangeError(
                f"tabulated profile queried outside [0, {self.period}]^2"
            )
        return x1, x2

    def derivative(self, x1, x2, d1: int = 0, d2: int = 0) -> np.ndarray:
        """D1^d1 D2^d2 g at (x1, x2), broadcasting."""
        x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
        if self.kind == "flat":
            return np.zeros(x1.shape)
        if self.kind == "tabulated":
            a1, a2 = self._table_args(x1, x2)
            return self._spline.ev(a1, a2, dx=d1, dy=d2)
        k = self.wavenumber
        # cos(k x) differentiated n times is k^n cos(k x + n pi/2)
        c1 = k**d1 * np.cos(k * x1 + d1 * np.pi / 2)
        c2 = k**d2 * np.cos(k * x2 + d2 * np.pi / 2)
        out = self.amplitude * c1 * c2
        if d1 == 0 and d2 == 0:
            out = out + self.amplitude
        return out

    def __call__(self, x1, x2) -> np.ndarray:
        return self.derivative(x1, x2)

    def gradient(self, x1, x2):
        return self.derivative(x1, x2, 1, 0), self.derivative(x1, x2, 0, 1)

    def hessian(self, x1, x2):
        return (
            self.derivative(x1, x2, 2, 0),
            self.derivative(x1, x2, 1, 1),
            self.derivative(x1, x2, 0, 2),
        )

    def sup(self, samples: int = L_SAMPLES_PER_PERIOD) -> float:
        x1, x2 = self._period_mesh(samples)
        return float(np.max(np.abs(self(x1, x2))))

    def lipschitz_constant(self, samples: int = L_SAMPLES_PER_PERIOD) -> float:
        """L: sum of sup-norms of D^gamma g over 1 <= |gamma| <= 2, by dense sampling."""
        x1, x2 = self._period_mesh(samples)
        total = 0.0
        for d1, d2 in ((1, 0), (0, 1), (2, 0), (1, 1), (0, 2)):
            total += float(np.max(np.abs(self.derivative(x1, x2, d1, d2))))
        return total

    def _period_mesh(self, samples):
        s = np.arange(samples) * (self.period / samples)
        return np.meshgrid(s, s, indexing="ij")


def eval_boundary(profile: BoundaryProfile, xp) -> np.ndarray:
    """g(x') for points xp shaped (2, ...)."""
    xp = np.asarray(xp, float)
    return profile(xp[0], xp[1])


@dataclass(frozen=True)
class TransformMatrices:
    """B, B_g and dg at a set of points y'. Shapes (3,3,...), (3,3,...), (3,...)."""

    B: np.ndarray
    Bg: np.ndarray
    dg: np.ndarray

    def inverse(self, scale: float) -> np.ndarray:
        # B_g is nilpotent, so (I + s B_g)^-1 = I - s B_g exactly
        return _identity_like(self.Bg) - scale * self.Bg

    def determinant(self) -> np.ndarray:
        # Lower triangular with unit diagonal
        return self.B[0, 0] * self.B[1, 1] * self.B[2, 2]


def _identity_like(m):
    eye = np.zeros_like(m)
    for i in range(3):
        eye[i, i] = 1.0
    return eye


@dataclass(frozen=True)
class FlatteningMap:
    profile: BoundaryProfile
    delta: float
    alpha: float

    def __post_init__(self):
        if not (0 < self.delta < 1):
            raise DomainError(f"delta must lie in (0, 1), got {self.delta}")
        if not self.alpha > 2.5:
            raise DomainError(f"alpha must exceed 5/2, got {self.alpha}")

    @property
    def lift(self) -> float:
        """delta**alpha, the height scale of the wall."""
        return self.delta**self.alpha

    @property
    def slope(self) -> float:
        """delta**(alpha-1), the size of B - I."""
        return self.delta ** (self.alpha - 1)

    @property
    def oscillation_period(self) -> float:
        return self.delta * self.profile.period

    def wall(self, y1, y2) -> np.ndarray:
        return self.lift * self.profile(np.asarray(y1) / self.delta, np.asarray(y2) / self.delta)

    def psi0(self, y) -> np.ndarray:
        y = np.asarray(y, float)
        out = y.copy()
        out[2] = y[2] + self.wall(y[0], y[1])
        return out

    def phi0(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        out = x.copy()
        out[2] = x[2] - self.wall(x[0], x[1])
        return out

    def wall_gradient(self, y1, y2):
        """(D1g, D2g) evaluated at y'/delta."""
        s1 = np.asarray(y1, float) / self.delta
        s2 = np.asarray(y2, float) / self.delta
        return self.profile.gradient(s1, s2)

    def wall_hessian(self, y1, y2):
        """(D11g, D12g, D22g) evaluated at y'/delta."""
        s1 = np.asarray(y1, float) / self.delta
        s2 = np.asarray(y2, float) / self.delta
        return self.profile.hessian(s1, s2)


def flatten_pair(fmap: FlatteningMap):
    """(phi0, psi0, pullback) where pullback(f)(y) = f(psi0(y))."""

    def pullback(f: Callable) -> Callable:
        def pulled(y, *args, **kwargs):
            return f(fmap.psi0(y), *args, **kwargs)

        return pulled

    return fmap.phi0, fmap.psi0, pullback


def matrices_at(fmap: FlatteningMap, yp) -> TransformMatrices:
    """B, B_g, dg at points yp shaped (2, ...). Independent of y3."""
    yp = np.asarray(yp, float)
    d1g, d2g = fmap.wall_gradient(yp[0], yp[1])
    shape = d1g.shape
    Bg = np.zeros((3, 3) + shape)
    Bg[2, 0] = -d1g
    Bg[2, 1] = -d2g
    B = _identity_like(Bg) + fmap.slope * Bg
    dg = np.stack([-d1g, -d2g, np.zeros(shape)])
    return TransformMatrices(B=B, Bg=Bg, dg=dg)
