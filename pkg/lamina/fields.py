"""Grids, fields, derivatives and norms.

x' is periodic on [0, P)^2 and differentiated spectrally, y3 runs over a graded
grid on [0, H] with second-order finite differences. Integrals use the
rectangle rule in x' (exact for trigonometric polynomials) and the trapezoid
rule in y3.
"""
import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import optimize, sparse

from lamina import console
from lamina.constants import BOX_PERIOD
from lamina.errors import ConfigurationError, DomainError, GridMismatchError, ValidationError


def _power_of_two(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


def graded_nodes(height: float, wall_spacing: float, n3: int, max_ratio: float = 1.05):
    """Nodes 0 = z_0 < ... < z_{n-1} = height with geometric spacing from the wall.

    Uses at least n3 nodes; more are added when the grading would exceed max_ratio.
    """
    if height <= 0 or wall_spacing <= 0:
        raise ConfigurationError("grid height and wall spacing must be positive")
    if n3 < 4:
        raise ConfigurationError("direction 3 needs at least 4 nodes")
    intervals = n3 - 1
    if wall_spacing * intervals >= height:
        return np.linspace(0.0, height, n3)
    # Fewest intervals that respect the ratio bound
    needed = math.ceil(math.log1p(height * (max_ratio - 1) / wall_spacing) / math.log(max_ratio))
    intervals = max(intervals, needed)

    def total(r):
        return wall_spacing * (r**intervals - 1) / (r - 1) - height

    ratio = optimize.brentq(total, 1 + 1e-12, max_ratio + 1e-9, xtol=1e-15)
    spacing = wall_spacing * ratio ** np.arange(intervals)
    z = np.concatenate([[0.0], np.cumsum(spacing)])
    z[-1] = height
    return z


@dataclass(frozen=True, eq=False)
class Grid:
    n1: int
    n2: int
    z: np.ndarray
    period: float = BOX_PERIOD

    def __post_init__(self):
        if not (_power_of_two(self.n1) and _power_of_two(self.n2)):
            raise ConfigurationError(f"N1, N2 must be powers of two, got {self.n1}, {self.n2}")
        z = np.asarray(self.z, float)
        if z.ndim != 1 or z.size < 4:
            raise ConfigurationError("direction 3 needs at least 4 nodes")
        if z[0] != 0.0 or np.any(np.diff(z) <= 0):
            raise ConfigurationError("y3 nodes must start at 0 and increase strictly")
        object.__setattr__(self, "z", z)

    @classmethod
    def uniform(cls, n1, n2, n3, height, period=BOX_PERIOD) -> "Grid":
        return cls(n1, n2, np.linspace(0.0, height, n3), period)

    @classmethod
    def graded(cls, n1, n2, n3, height, wall_spacing, max_ratio=1.05, period=BOX_PERIOD) -> "Grid":
        z = graded_nodes(height, wall_spacing, n3, max_ratio)
        if z.size > n3:
            console.warn(f"Raised N3 from {n3} to {z.size} to keep the grading ratio <= {max_ratio}")
        return cls(n1, n2, z, period)

    @property
    def n3(self) -> int:
        return self.z.size

    @property
    def height(self) -> float:
        return float(self.z[-1])

    @property
    def h1(self) -> float:
        return self.period / self.n1

    @property
    def h2(self) -> float:
        return self.period / self.n2

    @property
    def h3(self) -> float:
        return float(np.min(np.diff(self.z)))

    @property
    def shape(self):
        return (self.n1, self.n2, self.n3)

    @cached_property
    def x1(self) -> np.ndarray:
        return np.arange(self.n1) * self.h1

    @cached_property
    def x2(self) -> np.ndarray:
        return np.arange(self.n2) * self.h2

    def coords(self):
        """Broadcastable coordinate arrays (n1,1,1), (1,n2,1), (1,1,n3)."""
        return self.x1[:, None, None], self.x2[None, :, None], self.z[None, None, :]

    def same_as(self, other: "Grid") -> bool:
        return (
            self.n1 == other.n1
            and self.n2 == other.n2
            and self.period == other.period
            and self.z.shape == other.z.shape
            and np.array_equal(self.z, other.z)
        )

    @cached_property
    def weights3(self) -> np.ndarray:
        dz = np.diff(self.z)
        w = np.zeros(self.n3)
        w[:-1] += dz / 2
        w[1:] += dz / 2
        return w

    @cached_property
    def weights(self) -> np.ndarray:
        """Quadrature weights broadcastable to (n1, n2, n3)."""
        return self.h1 * self.h2 * self.weights3[None, None, :]

    @cached_property
    def k1(self) -> np.ndarray:
        return _wavenumbers(self.n1, self.period)

    @cached_property
    def k2(self) -> np.ndarray:
        return _wavenumbers(self.n2, self.period)

    @cached_property
    def kr2(self) -> np.ndarray:
        """Wavenumbers of the half spectrum along x2."""
        k = np.fft.rfftfreq(self.n2, d=self.period / (2 * np.pi * self.n2))
        k[-1] = 0.0
        return k

    @cached_property
    def d3(self) -> sparse.csr_matrix:
        return _d3_matrix(self.z)

    @cached_property
    def d3t(self) -> sparse.csr_matrix:
        return self.d3.T.tocsr()

    def resolution_report(self, layer_width: float, oscillation_period: Optional[float], wall_height: float = 0.0) -> dict:
        """Whether the layer and the wall oscillation are resolved, and whether the lid is high enough.

        The lid needs H >= 4 max(layer width, wall height) and H >= 1.
        """
        min_height = max(4 * max(layer_width, wall_height), 1.0)
        report = {
            "h3": self.h3,
            "layer_width": layer_width,
            "layer_resolved": self.h3 <= layer_width / 8 * (1 + 1e-9),
            "min_height": min_height,
            "height_ok": self.height >= min_height,
            "oscillation_resolved": True,
        }
        if oscillation_period is not None:
            report["oscillation_resolved"] = max(self.h1, self.h2) <= oscillation_period / 16
        return report


def _wavenumbers(n, period):
    k = np.fft.fftfreq(n, d=period / (2 * np.pi * n))
    k[n // 2] = 0.0  # Nyquist mode carries no derivative
    return k


def _d3_matrix(z):
    """Second-order first derivative on nonuniform nodes, one-sided at both ends."""
    n = z.size
    rows, cols, vals = [], [], []
    h = np.diff(z)
    for k in range(1, n - 1):
        hm, hp = h[k - 1], h[k]
        rows += [k, k, k]
        cols += [k - 1, k, k + 1]
        vals += [-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))]
    a, b = h[0], h[1]
    rows += [0, 0, 0]
    cols += [0, 1, 2]
    vals += [-(2 * a + b) / (a * (a + b)), (a + b) / (a * b), -a / (b * (a + b))]
    a, b = h[-1], h[-2]
    rows += [n - 1, n - 1, n - 1]
    cols += [n - 1, n - 2, n - 3]
    vals += [(2 * a + b) / (a * (a + b)), -(a + b) / (a * b), a / (b * (a + b))]
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


@dataclass(frozen=True, eq=False)
class Field:
    """Samples of a scalar (1 component) or vector (3 components) field.

    ``data`` has shape (components, n1, n2, n3).
    """

    grid: Grid
    data: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        data = np.asarray(self.data, float)
        if data.ndim == 3:
            data = data[None]
        if data.shape[1:] != self.grid.shape or data.shape[0] not in (1, 3):
            raise GridMismatchError(
                f"field of shape {data.shape} does not fit grid {self.grid.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise ValidationError("field has non-finite entries")
        object.__setattr__(self, "data", data)

    @property
    def components(self) -> int:
        return self.data.shape[0]

    def __getitem__(self, i) -> np.ndarray:
        return self.data[i]

    def with_data(self, data, time=None) -> "Field":
        return Field(self.grid, data, self.time if time is None else time)

    def __add__(self, other):
        _check_same(self, other)
        return self.with_data(self.data + other.data)

    def __sub__(self, other):
        _check_same(self, other)
        return self.with_data(self.data - other.data)

    def __mul__(self, scalar):
        return self.with_data(self.data * scalar)

    __rmul__ = __mul__


def _check_same(a: Field, b: Field):
    if not a.grid.same_as(b.grid) or a.components != b.components:
        raise GridMismatchError("fields live on different grids or have different components")


# Raw-array operators. Arrays have shape (..., n1, n2, n3).


def spectral_derivative(data: np.ndarray, grid: Grid, direction: int, order: int = 1) -> np.ndarray:
    axis = data.ndim - 3 + (direction - 1)
    n = data.shape[axis]
    shape = [1] * data.ndim
    kr = np.fft.rfftfreq(n, d=grid.period / (2 * np.pi * n))
    if n % 2 == 0:
        kr[-1] = 0.0
    shape[axis] = kr.size
    hat = np.fft.rfft(data, axis=axis)
    hat *= (1j * kr.reshape(shape)) ** order
    return np.fft.irfft(hat, n=n, axis=axis)


def _apply3(matrix, data):
    shape = data.shape
    flat = data.reshape(-1, shape[-1])
    return np.asarray((matrix @ flat.T).T).reshape(shape)


def d3(data: np.ndarray, grid: Grid) -> np.ndarray:
    return _apply3(grid.d3, data)


def d(data: np.ndarray, grid: Grid, direction: int) -> np.ndarray:
    if direction in (1, 2):
        return spectral_derivative(data, grid, direction)
    if direction == 3:
        return d3(data, grid)
    raise DomainError(f"direction must be 1, 2 or 3, got {direction}")


def div_adjoint3(data: np.ndarray, grid: Grid) -> np.ndarray:
    """-W^-1 D3^T W q: the negative adjoint of D3 in the trapezoid inner product."""
    w = grid.weights3
    return -_apply3(grid.d3t, data * w) / w


def grad(data: np.ndarray, grid: Grid) -> np.ndarray:
    """Gradient of (..., n1, n2, n3) data, new leading axis of length 3."""
    return np.stack([d(data, grid, j) for j in (1, 2, 3)])


def weak_divergence(q: np.ndarray, grid: Grid) -> np.ndarray:
    """Divergence defined as the negative adjoint of grad: <div q, p> = -<q, grad p>."""
    # Spectral derivatives are skew, so they are their own negative adjoint
    return (
        spectral_derivative(q[0], grid, 1)
        + spectral_derivative(q[1], grid, 2)
        + div_adjoint3(q[2], grid)
    )


def inner(a: np.ndarray, b: np.ndarray, grid: Grid) -> float:
    """Quadrature of sum_i a_i b_i over the box."""
    prod = a * b
    if prod.ndim > 3:
        prod = prod.reshape((-1,) + grid.shape).sum(axis=0)
    return float(np.sum(prod * grid.weights))


# Field-level operations


def differentiate(f: Field, direction: int) -> Field:
    if direction == 3 and f.grid.n3 < 4:
        raise DomainError("direction 3 needs at least 4 nodes")
    return f.with_data(d(f.data, f.grid, direction))


def divergence(f: Field) -> Field:
    if f.components != 3:
        raise DomainError("divergence needs a vector field")
    return f.with_data(weak_divergence(f.data, f.grid)[None])


def gradient(f: Field) -> Field:
    if f.components != 1:
        raise DomainError("gradient needs a scalar field")
    return f.with_data(grad(f.data[0], f.grid))


NORM_KINDS = ("L2", "Linf", "H1", "H2", "H3", "weighted-L2", "trace-L2", "trace-H1")


def _multi_indices(order):
    for total in range(order + 1):
        for g in itertools.product(range(total + 1), repeat=3):
            if sum(g) == total:
                yield g


def sobolev_sq(data: np.ndarray, grid: Grid, order: int) -> float:
    """Sum over |gamma| <= order of ||D^gamma f||_L2^2."""
    total = 0.0
    for g in _multi_indices(order):
        deriv = data
        for direction, count in zip((1, 2, 3), g):
            for _ in range(count):
                deriv = d(deriv, grid, direction)
        total += inner(deriv, deriv, grid)
    return total


def norm(f, kind: str = "L2", gamma: float = 2.0, grid: Optional[Grid] = None) -> float:
    """Norms of a Field (or a raw array with ``grid`` given)."""
    if isinstance(f, Field):
        data, grid = f.data, f.grid
    else:
        data = np.asarray(f, float)
        if grid is None:
            raise DomainError("a raw array needs its grid")
    if kind == "L2":
        return math.sqrt(inner(data, data, grid))
    if kind == "Linf":
        return float(np.max(np.abs(data)))
    if kind in ("H1", "H2", "H3"):
        return math.sqrt(sobolev_sq(data, grid, int(kind[1])))
    if kind == "weighted-L2":
        weight = grid.z ** gamma
        return math.sqrt(inner(data, data * weight, grid))
    if kind in ("trace-L2", "trace-H1"):
        trace = data[..., 0]
        area = grid.h1 * grid.h2
        total = float(np.sum(trace**2)) * area
        if kind == "trace-H1":
            for direction in (1, 2):
                dt = spectral_derivative(data, grid, direction)[..., 0]
                total += float(np.sum(dt**2)) * area
        return math.sqrt(total)
    raise DomainError(f"unknown norm kind '{kind}', choose from {NORM_KINDS}")


def spectral_l2(f: Field) -> float:
    """L2 norm through the x'-Fourier coefficients (Parseval) and trapezoid in y3."""
    data = f.data
    hat = np.fft.fft2(data, axes=(-3, -2))
    n = f.grid.n1 * f.grid.n2
    slab = np.sum(np.abs(hat) ** 2, axis=(-3, -2)) * (f.grid.period**2 / n**2)
    if slab.ndim > 1:
        slab = slab.sum(axis=0)
    return math.sqrt(float(np.sum(slab * f.grid.weights3)))
