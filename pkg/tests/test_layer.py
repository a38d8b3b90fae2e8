import numpy as np
import pytest

from lamina.errors import InsufficientDataError, ValidationError
from lamina.flow import build_correctors, manufactured_euler
from lamina.geometry import BoundaryProfile, FlatteningMap
from lamina.layer import (
    BoundaryLayerField,
    SlopeRow,
    bl_divergence_residual,
    bl_scaling_report,
    build_bl,
    normal_flux_residual,
    separable_identity_gap,
)
from lamina.params import ParamTriple


@pytest.fixture(params=["shear", "vortex"])
def pair(request):
    fmap = FlatteningMap(BoundaryProfile.cosine(0.5), 0.25, 3.0)
    return build_correctors(manufactured_euler(request.param, 1.0, 1.0), ParamTriple(eta=1e-2, nu=1e-3, delta=0.25), fmap)


@pytest.fixture
def layer(pair, profiles):
    return build_bl(pair, profiles, pair.p)


def test_layer_cancels_wall_velocity(layer):
    y1, y2 = np.random.default_rng(0).uniform(0, 2 * np.pi, (2, 100))
    zero = np.zeros_like(y1)
    assert np.max(np.abs(layer.value(0.2, y1, y2, zero) + layer.pair.wall_velocity(0.2, y1, y2))) <= 1e-15


def test_layer_is_confined(layer):
    y1, y2 = np.random.default_rng(1).uniform(0, 2 * np.pi, (2, 100))
    for height in (1.0, 2.0):
        y3 = np.full_like(y1, height * layer.width)
        assert np.all(layer.value(0.5, y1, y2, y3) == 0)


def test_layer_divergence_and_flux(layer):
    assert bl_divergence_residual(layer, samples=2000) <= 1e-8
    assert normal_flux_residual(layer, samples=2000) <= 1e-12


def test_layer_gradient_matches_finite_differences(pair, profiles):
    wide = BoundaryLayerField(pair, profiles, pair.p, width=0.3)
    rng = np.random.default_rng(2)
    y = np.stack([*rng.uniform(0, 2 * np.pi, (2, 30)), rng.uniform(0.01, 0.29, 30)])
    h = 1e-6
    grad = wide.gradient(0.4, *y)
    for j in range(3):
        step = np.zeros((3, 1))
        step[j] = h
        fd = (wide.value(0.4, *(y + step)) - wide.value(0.4, *(y - step))) / (2 * h)
        assert np.allclose(grad[:, j], fd, atol=1e-5)


def test_layer_time_derivative(pair, profiles):
    wide = BoundaryLayerField(pair, profiles, pair.p, width=0.3)
    y1, y2, y3 = np.array([0.3]), np.array([1.2]), np.array([0.1])
    h = 1e-6
    fd = (wide.value(0.5 + h, y1, y2, y3) - wide.value(0.5 - h, y1, y2, y3)) / (2 * h)
    assert np.allclose(wide.dt(0.5, y1, y2, y3), fd, atol=1e-7)


def test_separable_identity(layer):
    assert separable_identity_gap(layer) <= 1e-8


def test_scaling_bounds_hold(pair, profiles):
    rows = bl_scaling_report(pair, profiles, pair.p, [1e-5, 1e-6, 1e-7, 1e-8, 1e-9], cross_check=False)
    assert len(rows) == 9
    assert all(r.passed for r in rows)
    by_name = {r.quantity: r for r in rows}
    assert by_name["normal_l2"].sharp
    assert by_name["b_tangential_linf"].sharp
    # The shear flow has A = 0, which leaves no normal component at all
    assert by_name["b_normal_linf"].negligible == (pair.flow.kind == "shear")


def test_scaling_needs_enough_widths(pair, profiles):
    with pytest.raises(InsufficientDataError):
        bl_scaling_report(pair, profiles, pair.p, [1e-4, 1e-5])


def test_slope_row_verdicts():
    faster = SlopeRow("b_normal_l2", 0.5, 0.75, 1.0, float("nan"))
    assert faster.passed and not faster.sharp
    assert not SlopeRow("normal_l2", -0.25, -0.5, 1.0, 0.0).passed


def test_width_must_be_below_one(pair, profiles):
    with pytest.raises(ValidationError):
        BoundaryLayerField(pair, profiles, pair.p, width=1.5)
