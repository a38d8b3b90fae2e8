"""Admissible parameter triples (eta, nu, delta), the default beta and theta."""
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from lamina.constants import EPSILON_STAR
from lamina.errors import DomainError, ValidationError

# Relative slack on the non-strict clauses, for rounding in beta**2 and delta**(alpha-1)
CLAUSE_RTOL = 1e-12


def beta_default(eta: float, nu: float) -> float:
    """(eta + sqrt(nu/eta))**(1/2)"""
    if not (0 < nu < eta < 1):
        raise DomainError(f"beta_default needs 0 < nu < eta < 1, got eta={eta}, nu={nu}")
    return math.sqrt(eta + math.sqrt(nu / eta))


def constant_beta(value: float) -> Callable:
    def beta(eta, nu):
        return value

    return beta


def theta_of(epsilon: float, eta: float, lam: float, w0_sup_norm: float) -> float:
    return lam**2 * epsilon**2 * eta / (4 * w0_sup_norm**2 + 1)


@dataclass(frozen=True)
class Verdict:
    admissible: bool
    reason: str = ""
    clauses: dict = field(default_factory=dict)

    def __bool__(self):
        return self.admissible


@dataclass(frozen=True)
class ParamTriple:
    """(eta, nu, delta) with the constants that come with them.

    ``w0_sup_norm`` is sup_t ||w0(t)||_{H^3}; theta and beta_value are derived.
    """

    eta: float
    nu: float
    delta: float
    alpha: float = 3.0
    lam: float = 0.5
    k0: float = 1.0
    delta0: float = 0.1
    epsilon: float = 0.1
    w0_sup_norm: float = 1.0
    beta: Callable = field(default=beta_default, repr=False, compare=False)

    def __post_init__(self):
        for name in ("eta", "nu", "delta", "alpha", "lam", "k0", "delta0", "epsilon", "w0_sup_norm"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValidationError(f"parameter {name} must be finite, got {value}")
        if not (0 < self.lam < 1):
            raise ValidationError(f"Lambda must lie in (0, 1), got {self.lam}")
        if self.k0 <= 0 or self.delta0 <= 0 or self.epsilon <= 0:
            raise ValidationError("K0, delta0 and epsilon must be positive")
        if self.epsilon > EPSILON_STAR:
            raise ValidationError(f"epsilon must not exceed {EPSILON_STAR}")

    @property
    def theta(self) -> float:
        return theta_of(self.epsilon, self.eta, self.lam, self.w0_sup_norm)

    @property
    def layer_width(self) -> float:
        """sqrt(theta * nu)"""
        return math.sqrt(self.theta * self.nu)

    @property
    def beta_value(self) -> float:
        return float(self.beta(self.eta, self.nu))

    @property
    def oscillation_rate(self) -> float:
        """delta**(alpha - 5/2)"""
        return self.delta ** (self.alpha - 2.5)

    @property
    def budget(self) -> float:
        """beta + delta**(alpha - 5/2), the convergence budget."""
        return self.beta_value + self.oscillation_rate

    def with_flow_norm(self, w0_sup_norm: float) -> "ParamTriple":
        return replace(self, w0_sup_norm=w0_sup_norm)


def is_admissible(p: ParamTriple, beta: Optional[Callable] = None) -> Verdict:
    """Membership of (eta, nu, delta) in the admissible set.

    The reason names the first violated clause."""
    beta = p.beta if beta is None else beta
    eta, nu, delta = p.eta, p.nu, p.delta
    clauses = {}

    clauses["nu positive"] = nu > 0
    clauses["nu < eta"] = nu < eta
    clauses["eta < 1"] = eta < 1
    clauses["delta in (0, delta0)"] = 0 < delta < p.delta0
    lhs = delta ** (p.alpha - 1) * eta
    clauses["anisotropy"] = lhs <= p.k0 * nu * (1 + CLAUSE_RTOL)
    if 0 < nu < eta:
        b = float(beta(eta, nu))
        if not np.isfinite(b) or b <= 0:
            raise ValidationError(f"beta must be finite and positive, got {b}")
        clauses["beta"] = eta + math.sqrt(nu / eta) <= b**2 * (1 + CLAUSE_RTOL)
    else:
        clauses["beta"] = False

    reasons = {
        "nu positive": "ν must be positive",
        "nu < eta": "strict ν < η violated",
        "eta < 1": "strict η < 1 violated",
        "delta in (0, delta0)": "δ ∈ (0, δ₀) violated",
        "anisotropy": "δ^{α−1}η ≤ K₀ν violated",
        "beta": "η + √(ν/η) ≤ β(η,ν)² violated",
    }
    for name, ok in clauses.items():
        if not ok:
            return Verdict(False, reasons[name], clauses)
    return Verdict(True, "", clauses)


def smallness_value(p: ParamTriple, lipschitz: float) -> float:
    """delta**(alpha-1) * (Lambda**-2 + K0 Lambda**-5 L**2); at most 1/4 for the ellipticity sandwich."""
    return p.delta ** (p.alpha - 1) * (p.lam**-2 + p.k0 * p.lam**-5 * lipschitz**2)


def smallness_holds(p: ParamTriple, lipschitz: float) -> bool:
    return smallness_value(p, lipschitz) <= 0.25


def theta_condition_holds(p: ParamTriple, w0_norm: float) -> bool:
    """theta <= Lambda^2 eps^2 eta / (4 ||w0||^2), needed by the layer-stretch bound."""
    if w0_norm == 0:
        return True
    return p.theta <= p.lam**2 * p.epsilon**2 * p.eta / (4 * w0_norm**2)


def geometric(start: float, ratio: float, count: int) -> list:
    return [start * ratio**k for k in range(count)]
