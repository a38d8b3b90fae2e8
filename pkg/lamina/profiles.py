"""Boundary-layer profiles phi, psi and their scaled norms.

phi(z) = rho(z)(1 - lam z) with the bump rho(z) = exp(1 - 1/(1 - z^2)) on [0, 1),
lam chosen so that phi has zero mean on [0, 1], psi(z) = int_0^z phi.
Both vanish identically for z >= 1.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, optimize
from scipy.interpolate import CubicHermiteSpline

from lamina.errors import ConstructionError, DomainError

# kind -> exponent of a in the closed form
SCALED_KINDS = {
    "phi_l2": 0.5,
    "psi_l2": 1.5,
    "dphi_weighted_l2": 0.5,
    "dphi_l2": -0.5,
    "dpsi_weighted_l2": 0.5,
    "psi_linf": 1.0,
    "dphi_weighted_linf": 1.0,
    "dpsi_weighted_linf": 1.0,
}
# Letter labels (a)-(h), in SCALED_KINDS order
KIND_LETTERS = dict(zip("abcdefgh", SCALED_KINDS))

TABLE_INTERVALS = 4096
GAUSS_NODES = 10


def rho(z) -> np.ndarray:
    z = np.asarray(z, float)
    inside = (z >= 0) & (z < 1)
    zz = np.where(inside, z, 0.0)
    return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - zz**2)), 0.0)


def rho_prime(z) -> np.ndarray:
    z = np.asarray(z, float)
    inside = (z >= 0) & (z < 1)
    zz = np.where(inside, z, 0.0)
    return np.where(inside, rho(zz) * (-2.0 * zz / (1.0 - zz**2) ** 2), 0.0)


def _quad(f, a, b, epsabs=0.0):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err = integrate.quad(f, a, b, epsabs=epsabs, epsrel=1e-12, limit=200)
    if not np.isfinite(value) or err > 1e-9 * max(abs(value), 1e-300):
        raise ConstructionError(
            f"profile quadrature failed on [{a}, {b}]: value {value}, error estimate {err}"
        )
    return value


@dataclass(frozen=True, eq=False)
class ProfilePair:
    lam: float
    norms: dict
    _psi_spline: CubicHermiteSpline = field(repr=False)

    def phi(self, z) -> np.ndarray:
        z = np.asarray(z, float)
        return rho(z) * (1.0 - self.lam * z)

    def dphi(self, z) -> np.ndarray:
        z = np.asarray(z, float)
        return rho_prime(z) * (1.0 - self.lam * z) - self.lam * rho(z)

    def psi(self, z) -> np.ndarray:
        z = np.asarray(z, float)
        if np.any(z < 0):
            raise DomainError("psi is defined on [0, inf)")
        inside = z < 1
        return np.where(inside, self._psi_spline(np.where(inside, z, 0.0)), 0.0)


def build_profiles() -> ProfilePair:
    int_rho = _quad(lambda z: float(rho(z)), 0.0, 1.0)
    int_zrho = _quad(lambda z: z * float(rho(z)), 0.0, 1.0)
    lam = int_rho / int_zrho

    def phi(z):
        return rho(z) * (1.0 - lam * z)

    # psi on a fine table by per-interval Gauss-Legendre, then Hermite interpolation
    # with phi as the exact derivative data
    edges = np.linspace(0.0, 1.0, TABLE_INTERVALS + 1)
    nodes, weights = leggauss(GAUSS_NODES)
    left, right = edges[:-1, None], edges[1:, None]
    mid, half = (left + right) / 2, (right - left) / 2
    pieces = np.sum(weights * phi(mid + half * nodes), axis=1) * half[:, 0]
    table = np.concatenate([[0.0], np.cumsum(pieces)])
    table[-1] = 0.0  # zero mean is exact by the choice of lam
    spline = CubicHermiteSpline(edges, table, phi(edges))

    pair = ProfilePair(lam=lam, norms={}, _psi_spline=spline)
    norms = {
        "phi_l2": np.sqrt(_quad(lambda z: float(pair.phi(z)) ** 2, 0.0, 1.0)),
        "psi_l2": np.sqrt(_quad(lambda z: float(pair.psi(z)) ** 2, 0.0, 1.0)),
        "dphi_l2": np.sqrt(_quad(lambda z: float(pair.dphi(z)) ** 2, 0.0, 1.0)),
        "dphi_weighted_l2": np.sqrt(_quad(lambda z: z**2 * float(pair.dphi(z)) ** 2, 0.0, 1.0)),
        "phi_weighted_l2": np.sqrt(_quad(lambda z: z**2 * float(pair.phi(z)) ** 2, 0.0, 1.0)),
        "psi_linf": _sup(lambda z: np.abs(pair.psi(z))),
        "dphi_weighted_linf": _sup(lambda z: z**2 * np.abs(pair.dphi(z))),
        "phi_weighted_linf": _sup(lambda z: z**2 * np.abs(pair.phi(z))),
    }
    norms = {k: float(v) for k, v in norms.items()}
    object.__setattr__(pair, "norms", norms)
    return pair


def _sup(f, samples: int = 20001) -> float:
    """Maximum of f on [0, 1]: dense scan refined by a bounded scalar search."""
    z = np.linspace(0.0, 1.0, samples)
    values = f(z)
    k = int(np.argmax(values))
    lo, hi = z[max(k - 1, 0)], z[min(k + 1, samples - 1)]
    res = optimize.minimize_scalar(
        lambda s: -float(f(np.array([s]))[0]), bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-12},
    )
    return float(max(values[k], -res.fun))


# Closed-form base norm for each kind
_BASE = {
    "phi_l2": "phi_l2",
    "psi_l2": "psi_l2",
    "dphi_weighted_l2": "dphi_weighted_l2",
    "dphi_l2": "dphi_l2",
    "dpsi_weighted_l2": "phi_weighted_l2",
    "psi_linf": "psi_linf",
    "dphi_weighted_linf": "dphi_weighted_linf",
    "dpsi_weighted_linf": "phi_weighted_linf",
}


def _resolve_kind(kind: str) -> str:
    kind = KIND_LETTERS.get(kind, kind)
    if kind not in SCALED_KINDS:
        raise DomainError(f"unknown scaled-norm kind '{kind}'")
    return kind


def scaled_norm(pair: ProfilePair, a: float, kind: str, method: str = "closed") -> float:
    """Norm of the profile rescaled to width a (letters 'a'..'h' or the kind names).

    method='quadrature' integrates the rescaled function directly instead of
    using the change-of-variables closed form.
    """
    kind = _resolve_kind(kind)
    if not (0 < a < 1):
        raise DomainError(f"layer width must lie in (0, 1), got {a}")
    if method == "closed":
        return a ** SCALED_KINDS[kind] * pair.norms[_BASE[kind]]
    if method != "quadrature":
        raise DomainError(f"unknown method '{method}'")

    def quad(f):
        # The rescaled functions are supported in [0, a]
        return np.sqrt(_quad(lambda y: float(f(np.array(y))), 0.0, a))

    if kind == "phi_l2":
        return quad(lambda y: pair.phi(y / a) ** 2)
    if kind == "psi_l2":
        return quad(lambda y: (a * pair.psi(y / a)) ** 2)
    if kind == "dphi_weighted_l2":
        return quad(lambda y: y**2 * (pair.dphi(y / a) / a) ** 2)
    if kind == "dphi_l2":
        return quad(lambda y: (pair.dphi(y / a) / a) ** 2)
    if kind == "dpsi_weighted_l2":
        return quad(lambda y: y**2 * (pair.phi(y / a) / a) ** 2)
    if kind == "psi_linf":
        return a * _sup(lambda z: np.abs(pair.psi(z)))
    if kind == "dphi_weighted_linf":
        return _sup(lambda z: (a * z) ** 2 * np.abs(pair.dphi(z)) / a)
    return _sup(lambda z: (a * z) ** 2 * np.abs(pair.phi(z)) / a)


def fitted_slopes(pair: ProfilePair, widths, method: str = "closed") -> dict:
    """Least-squares slope of log(scaled_norm) against log(a) per kind."""
    widths = np.asarray(widths, float)
    out = {}
    for kind in SCALED_KINDS:
        values = np.array([scaled_norm(pair, a, kind, method) for a in widths])
        out[kind] = float(np.polyfit(np.log(widths), np.log(values), 1)[0])
    return out
