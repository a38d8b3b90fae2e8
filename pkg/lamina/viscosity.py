"""Viscosity matrices A0 and the ellipticity sandwich of A = B A0 B^T."""
import math
from dataclasses import asdict, dataclass

import numpy as np

from lamina.config import ViscosityBlock
from lamina.errors import CheckFailure, ValidationError
from lamina.geometry import FlatteningMap, matrices_at
from lamina.params import ParamTriple, is_admissible, smallness_value

VISCOSITY_KINDS = ("diagonal", "checkerboard")
# Off-diagonal pattern of the checkerboard perturbation; eigenvalues 2, -1, -1
_PATTERN = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]])


@dataclass(frozen=True)
class ViscositySpec:
    """A0 = diag(eta, eta, nu), optionally plus a sign-flipping checkerboard of size perturbation * nu."""

    kind: str
    eta: float
    nu: float
    lam: float
    perturbation: float = 0.1
    cell_size: float = 0.5
    flip_interval: float = 0.1

    def __post_init__(self):
        if self.kind not in VISCOSITY_KINDS:
            raise ValidationError(f"viscosity kind must be one of {VISCOSITY_KINDS}, got '{self.kind}'")
        if not (0 < self.nu and 0 < self.eta):
            raise ValidationError("eta and nu must be positive")
        if not (0 < self.lam < 1):
            raise ValidationError(f"Lambda must lie in (0, 1), got {self.lam}")
        if self.kind == "checkerboard":
            if not (0 <= self.perturbation < 0.5):
                raise ValidationError("the checkerboard perturbation must lie in [0, 1/2)")
            if self.lam > 1 - 2 * self.perturbation:
                raise ValidationError(
                    f"Lambda = {self.lam} exceeds 1 - 2 * perturbation = {1 - 2 * self.perturbation}: "
                    "the checkerboard would break the ellipticity bounds"
                )
            if self.cell_size <= 0 or self.flip_interval <= 0:
                raise ValidationError("cell size and flip interval must be positive")

    @classmethod
    def from_block(cls, block: ViscosityBlock, default_cell: float) -> "ViscositySpec":
        cell = block.cell_size if block.cell_size is not None else default_cell
        return cls(block.kind, block.eta, block.nu, block.lam, block.perturbation, cell, block.flip_interval)

    def as_dict(self) -> dict:
        return asdict(self)

    @property
    def is_diagonal(self) -> bool:
        return self.kind == "diagonal" or self.perturbation == 0

    def sign(self, t, x1, x2, x3):
        """+-1 by cell parity, flipped every flip_interval in time."""
        cells = np.floor(np.asarray(x1) / self.cell_size) + np.floor(np.asarray(x2) / self.cell_size)
        cells = cells + np.floor(np.asarray(x3) / self.cell_size) + np.floor(np.asarray(t) / self.flip_interval)
        return 1.0 - 2.0 * np.mod(cells, 2.0)

    def a0(self, t, x1, x2, x3) -> np.ndarray:
        """A0 at physical points; shape (3, 3) + broadcast shape."""
        shape = np.broadcast(np.asarray(t), x1, x2, x3).shape
        out = np.zeros((3, 3) + shape)
        out[0, 0] = out[1, 1] = self.eta
        out[2, 2] = self.nu
        if not self.is_diagonal:
            s = self.sign(t, x1, x2, x3) * self.perturbation * self.nu
            out = out + _PATTERN.reshape((3, 3) + (1,) * len(shape)) * s
        return out


def physical_point(fmap: FlatteningMap, y1, y2, y3):
    """Psi0(y) as three arrays."""
    return y1, y2, np.asarray(y3, float) + fmap.wall(y1, y2)


def transformed_matrix(spec: ViscositySpec, fmap: FlatteningMap, t, y1, y2, y3) -> np.ndarray:
    """A = B A0(t, Psi0(y)) B^T, shape (3, 3) + broadcast shape."""
    a0 = spec.a0(t, *physical_point(fmap, y1, y2, y3))
    B = matrices_at(fmap, np.stack(np.broadcast_arrays(y1, y2))).B
    return np.einsum("ik...,kl...,jl...->ij...", B, a0, B)


@dataclass
class SandwichReport:
    samples: int
    min_lower: float
    max_upper: float
    max_cross: float
    eigen_min: float
    sampled_min: float
    smallness: float
    bound: float

    @property
    def eigen_agreement(self) -> float:
        """Relative gap between the sampled and the exact minimum ratio at the oracle points."""
        return abs(self.sampled_min - self.eigen_min) / self.eigen_min

    @property
    def passed(self) -> bool:
        return self.min_lower >= self.bound and self.eigen_agreement <= 0.05

    def as_dict(self) -> dict:
        return dict(asdict(self), eigen_agreement=self.eigen_agreement)


def _scaled_directions(rng, count, spec):
    """xi = D^(-1/2) zeta with zeta uniform on the sphere, D = diag(eta, eta, nu)."""
    zeta = rng.standard_normal((3, count))
    zeta /= np.linalg.norm(zeta, axis=0)
    return zeta / np.sqrt(np.array([spec.eta, spec.eta, spec.nu]))[:, None]


def _forms(A, xi, zeta):
    return np.einsum("ij...,i...,j...->...", A, xi, zeta)


def sandwich_check(
    spec: ViscositySpec,
    fmap: FlatteningMap,
    p: ParamTriple,
    samples: int = 1_000_000,
    eigen_points: int = 1000,
    directions: int = 2000,
    height: float = 8.0,
    t_final: float = 1.0,
    seed: int = 0,
    chunk: int = 100_000,
) -> SandwichReport:
    """Sample <A B^T xi, B^T xi> against eta|xi'|^2 + nu|xi3|^2 and the cross-term bound.

    Raises CheckFailure with the first sample whose lower ratio falls below Lambda/2.
    """
    verdict = is_admissible(p)
    if not verdict:
        raise ValidationError(f"inadmissible triple: {verdict.reason}")
    rng = np.random.default_rng(seed)
    bound = spec.lam / 2
    eps = p.delta ** (p.alpha - 1) * p.eta + p.nu
    min_lower, max_upper, max_cross = math.inf, 0.0, 0.0

    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        t = rng.uniform(0, t_final, n)
        y1, y2 = rng.uniform(0, 2 * np.pi, (2, n))
        y3 = rng.uniform(0, height, n)
        A = spec.a0(t, *physical_point(fmap, y1, y2, y3))
        B = matrices_at(fmap, np.stack([y1, y2])).B
        xi, zeta = _scaled_directions(rng, n, spec), _scaled_directions(rng, n, spec)
        bxi, bzeta = np.einsum("ji...,j...->i...", B, xi), np.einsum("ji...,j...->i...", B, zeta)

        energy = spec.eta * np.sum(xi[:2] ** 2, axis=0) + spec.nu * xi[2] ** 2
        lower = _forms(A, bxi, bxi) / energy
        k = int(np.argmin(lower))
        if lower[k] < bound:
            raise CheckFailure(
                f"ellipticity lower bound violated: ratio {lower[k]:.6g} < Lambda/2 = {bound:.6g}",
                witness={"t": float(t[k]), "y": [float(y1[k]), float(y2[k]), float(y3[k])], "xi": xi[:, k].tolist(), "ratio": float(lower[k])},
            )
        min_lower = min(min_lower, float(lower[k]))
        max_upper = max(max_upper, float(np.max(lower)))

        xp, zp = np.linalg.norm(xi[:2], axis=0), np.linalg.norm(zeta[:2], axis=0)
        shape = spec.eta * xp * zp + spec.nu * np.abs(xi[2] * zeta[2]) + eps * (np.abs(xi[2]) * zp + np.abs(zeta[2]) * xp)
        max_cross = max(max_cross, float(np.max(np.abs(_forms(A, bxi, bzeta)) / shape)))
        done += n

    eigen_min, sampled_min = _eigen_oracle(spec, fmap, rng, eigen_points, directions, height, t_final)
    lipschitz = fmap.profile.lipschitz_constant() if fmap.profile.kind != "flat" else 0.0
    return SandwichReport(
        samples=samples,
        min_lower=min_lower,
        max_upper=max_upper,
        max_cross=max_cross,
        eigen_min=eigen_min,
        sampled_min=sampled_min,
        smallness=smallness_value(p, lipschitz),
        bound=bound,
    )


def _eigen_oracle(spec, fmap, rng, points, directions, height, t_final):
    """Exact min of the scaled form by eigen-decomposition vs the sampled min at the same points."""
    t = rng.uniform(0, t_final, points)
    y1, y2 = rng.uniform(0, 2 * np.pi, (2, points))
    y3 = rng.uniform(0, height, points)
    A = transformed_matrix(spec, fmap, t, y1, y2, y3)
    scale = 1.0 / np.sqrt(np.array([spec.eta, spec.eta, spec.nu]))
    scaled = scale[:, None, None] * A * scale[None, :, None]
    eigen_min = float(np.min(np.linalg.eigvalsh(np.moveaxis(scaled, -1, 0))[:, 0]))

    zeta = rng.standard_normal((3, directions))
    zeta /= np.linalg.norm(zeta, axis=0)
    # Rayleigh quotients of every point against every direction
    quotients = np.einsum("ijp,id,jd->pd", scaled, zeta, zeta)
    return eigen_min, float(np.min(quotients))
