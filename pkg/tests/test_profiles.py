import numpy as np
import pytest
from scipy import integrate

from lamina.errors import DomainError
from lamina.profiles import SCALED_KINDS, fitted_slopes, rho, scaled_norm


def test_bump_support():
    assert rho(0.0) == pytest.approx(1.0)
    assert rho(1.0) == 0.0
    assert rho(-0.1) == 0.0
    assert rho(2.0) == 0.0


def test_phi_has_zero_mean(profiles):
    value, _ = integrate.quad(lambda z: float(profiles.phi(z)), 0.0, 1.0, epsabs=1e-13)
    assert value == pytest.approx(0.0, abs=1e-10)
    assert profiles.phi(0.0) == pytest.approx(1.0)


def test_psi_is_antiderivative(profiles):
    z = np.linspace(0.05, 0.95, 19)
    h = 1e-5
    slope = (profiles.psi(z + h) - profiles.psi(z - h)) / (2 * h)
    assert np.allclose(slope, profiles.phi(z), atol=1e-7)
    assert profiles.psi(0.0) == 0.0
    assert np.all(profiles.psi(np.array([1.0, 1.5, 10.0])) == 0.0)


def test_dphi_matches_finite_difference(profiles):
    z = np.linspace(0.05, 0.9, 18)
    h = 1e-6
    slope = (profiles.phi(z + h) - profiles.phi(z - h)) / (2 * h)
    assert np.allclose(slope, profiles.dphi(z), rtol=1e-5, atol=1e-6)


def test_psi_rejects_negative_argument(profiles):
    with pytest.raises(DomainError):
        profiles.psi(np.array([-0.1, 0.5]))


@pytest.mark.parametrize("kind", ["phi_l2", "psi_l2", "dpsi_weighted_l2", "psi_linf"])
def test_closed_form_matches_quadrature(profiles, kind):
    a = 0.05
    closed = scaled_norm(profiles, a, kind)
    direct = scaled_norm(profiles, a, kind, method="quadrature")
    assert closed == pytest.approx(direct, rel=1e-6)


def test_letters_alias_kinds(profiles):
    for letter, kind in zip("abcdefgh", SCALED_KINDS):
        assert scaled_norm(profiles, 0.1, letter) == scaled_norm(profiles, 0.1, kind)


def test_fitted_slopes(profiles):
    slopes = fitted_slopes(profiles, [1e-2, 1e-3, 1e-4, 1e-5])
    for kind, exponent in SCALED_KINDS.items():
        assert slopes[kind] == pytest.approx(exponent, abs=1e-9)


def test_scaled_norm_domain(profiles):
    with pytest.raises(DomainError):
        scaled_norm(profiles, 1.0, "phi_l2")
    with pytest.raises(DomainError):
        scaled_norm(profiles, 0.1, "z")
    with pytest.raises(DomainError):
        scaled_norm(profiles, 0.1, "phi_l2", method="simpson")
