import math

import hypothesis.strategies as st
import pytest
from hypothesis import assume, given

from lamina.errors import DomainError, ValidationError
from lamina.params import (
    ParamTriple,
    beta_default,
    constant_beta,
    geometric,
    is_admissible,
    smallness_value,
    theta_condition_holds,
    theta_of,
)


def test_default_triple_is_admissible():
    verdict = is_admissible(ParamTriple(eta=1e-2, nu=1e-3, delta=0.0625))
    assert verdict
    assert verdict.reason == ""
    assert all(verdict.clauses.values())


@pytest.mark.parametrize(
    "eta, nu, delta, reason",
    [
        (1e-2, 2e-2, 0.05, "strict ν < η violated"),
        (1e-2, 0.0, 0.05, "ν must be positive"),
        (1.5, 1e-3, 0.05, "strict η < 1 violated"),
        (1e-2, 1e-3, 0.2, "δ ∈ (0, δ₀) violated"),
        (0.5, 1e-4, 0.09, "δ^{α−1}η ≤ K₀ν violated"),
    ],
)
def test_first_violated_clause_is_named(eta, nu, delta, reason):
    verdict = is_admissible(ParamTriple(eta=eta, nu=nu, delta=delta))
    assert not verdict
    assert verdict.reason == reason


def test_small_beta_is_rejected():
    p = ParamTriple(eta=1e-2, nu=1e-3, delta=0.05, beta=constant_beta(0.01))
    verdict = is_admissible(p)
    assert not verdict
    assert verdict.reason == "η + √(ν/η) ≤ β(η,ν)² violated"


@given(st.floats(min_value=1e-6, max_value=0.9), st.floats(min_value=1e-3, max_value=0.999))
def test_default_beta_meets_its_clause(eta, fraction):
    nu = eta * fraction
    assume(nu > 0)
    b = beta_default(eta, nu)
    assert eta + math.sqrt(nu / eta) == pytest.approx(b**2, rel=1e-12)


def test_beta_default_domain():
    with pytest.raises(DomainError):
        beta_default(0.1, 0.2)


@given(
    st.floats(min_value=1e-3, max_value=1.0),
    st.floats(min_value=1e-6, max_value=0.9),
    st.floats(min_value=0.01, max_value=0.99),
    st.floats(min_value=0.0, max_value=50.0),
)
def test_theta_formula(epsilon, eta, lam, norm):
    theta = theta_of(epsilon, eta, lam, norm)
    assert theta == pytest.approx(lam**2 * epsilon**2 * eta / (4 * norm**2 + 1))
    assert theta <= lam**2 * epsilon**2 * eta


def test_derived_quantities():
    p = ParamTriple(eta=1e-2, nu=1e-3, delta=0.04, alpha=3.0, lam=0.5, epsilon=0.1, w0_sup_norm=0.0)
    assert p.theta == pytest.approx(0.25 * 0.01 * 0.01)
    assert p.layer_width == pytest.approx(math.sqrt(p.theta * 1e-3))
    assert p.oscillation_rate == pytest.approx(0.2)
    assert p.budget == pytest.approx(beta_default(1e-2, 1e-3) + 0.2)
    assert theta_condition_holds(p, 0.0)


def test_flow_norm_shrinks_theta():
    p = ParamTriple(eta=1e-2, nu=1e-3, delta=0.04)
    q = p.with_flow_norm(10.0)
    assert q.theta < p.theta
    assert theta_condition_holds(q, 10.0)


def test_triple_validation():
    with pytest.raises(ValidationError):
        ParamTriple(eta=1e-2, nu=1e-3, delta=0.04, lam=1.0)
    with pytest.raises(ValidationError):
        ParamTriple(eta=1e-2, nu=1e-3, delta=0.04, epsilon=2.0)
    with pytest.raises(ValidationError):
        ParamTriple(eta=math.nan, nu=1e-3, delta=0.04)


def test_smallness_grows_with_lipschitz():
    p = ParamTriple(eta=1e-2, nu=1e-3, delta=0.0625)
    assert smallness_value(p, 0.0) == pytest.approx(0.0625**2 * 4)
    assert smallness_value(p, 1.0) > smallness_value(p, 0.0)


def test_geometric():
    assert geometric(1.0, 0.5, 3) == [1.0, 0.5, 0.25]
