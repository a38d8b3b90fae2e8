import numpy as np
import pytest

from lamina.errors import ConfigurationError, DomainError, ValidationError
from lamina.flow import BoundRow, build_correctors, check_periods, manufactured_euler, wprop_report
from lamina.geometry import BoundaryProfile, FlatteningMap
from lamina.params import ParamTriple


def points(count=200, height=5.0, seed=0):
    rng = np.random.default_rng(seed)
    y1, y2 = rng.uniform(0, 2 * np.pi, (2, count))
    return y1, y2, rng.uniform(0, height, count)


@pytest.fixture
def fmap():
    return FlatteningMap(BoundaryProfile.cosine(0.5), 0.25, 3.0)


@pytest.fixture
def triple():
    return ParamTriple(eta=1e-2, nu=1e-3, delta=0.25)


@pytest.mark.parametrize("kind", ["shear", "vortex"])
@pytest.mark.parametrize("q_mode", ["zero", "cosine"])
def test_manufactured_flow_solves_euler(kind, q_mode):
    flow = manufactured_euler(kind, 1.0, 1.0, q_mode=q_mode)
    y = points()
    for t in (0.0, 0.4, 1.3):
        assert np.max(np.abs(flow.euler_residual(t, *y))) <= 1e-12
        assert np.max(np.abs(flow.divergence(t, *y))) <= 1e-12
    # Tangent to the flat wall
    assert np.max(np.abs(flow.initial(y[0], y[1], np.zeros_like(y[0]))[2])) <= 1e-15


def test_flow_validation():
    with pytest.raises(DomainError):
        manufactured_euler("jet", 1.0, 1.0)
    with pytest.raises(ValidationError):
        manufactured_euler("shear", -1.0, 1.0)
    with pytest.raises(DomainError):
        manufactured_euler("shear", 1.0, 1.0, q_mode="sine")


def test_norms_follow_the_time_factor():
    flow = manufactured_euler("vortex", 1.0, 1.0)
    assert flow.hs_norm(0.0) > 0
    assert flow.hs_norm(1.0) == pytest.approx(float(flow.temporal(1.0)) * flow.hs_norm(0.0))
    assert flow.sup_hs_norm(4.0) == pytest.approx(1.5 * flow.hs_norm(0.0), rel=1e-6)


def test_periods_must_tile_the_box(triple):
    check_periods(FlatteningMap(BoundaryProfile.cosine(0.5), 0.25, 3.0))
    check_periods(FlatteningMap(BoundaryProfile.flat(), 0.3, 3.0))
    with pytest.raises(ConfigurationError):
        check_periods(FlatteningMap(BoundaryProfile.cosine(0.5), 0.3, 3.0))


def test_map_and_params_must_agree(fmap):
    flow = manufactured_euler("shear", 1.0, 1.0)
    with pytest.raises(ConfigurationError):
        build_correctors(flow, ParamTriple(eta=1e-2, nu=1e-3, delta=0.125), fmap)


@pytest.mark.parametrize("kind", ["shear", "vortex"])
def test_corrector_invariants(kind, fmap, triple):
    flow = manufactured_euler(kind, 1.0, 1.0)
    pair = build_correctors(flow, triple, fmap)
    y = points()
    t = 0.7
    assert np.array_equal(pair.tilde(t, *y)[:2], -flow.velocity(t, *y)[:2])
    assert np.max(np.abs(pair.b_divergence(t, *y))) <= 1e-10
    assert np.max(np.abs(pair.wall_flux(t, y[0], y[1]))) <= 1e-12


@pytest.mark.parametrize("kind", ["shear", "vortex"])
def test_corrector_gradient_matches_finite_differences(kind, fmap, triple):
    pair = build_correctors(manufactured_euler(kind, 1.0, 1.0), triple, fmap)
    y = np.array(points(20, height=3.0, seed=1)) + np.array([0, 0, 0.1])[:, None]
    h = 1e-6
    grad = pair.gradient_spatial(*y)
    for j in range(3):
        step = np.zeros((3, 1))
        step[j] = h
        fd = (pair.velocity_spatial(*(y + step)) - pair.velocity_spatial(*(y - step))) / (2 * h)
        assert np.allclose(grad[:, j], fd, atol=1e-6)


def test_boundary_divergence_gradient(fmap, triple):
    pair = build_correctors(manufactured_euler("vortex", 1.0, 1.0), triple, fmap)
    y1, y2, _ = points(20, seed=2)
    h = 1e-6
    grad = pair.boundary_divergence_gradient(0.3, y1, y2)
    fd1 = (pair.boundary_divergence(0.3, y1 + h, y2) - pair.boundary_divergence(0.3, y1 - h, y2)) / (2 * h)
    fd2 = (pair.boundary_divergence(0.3, y1, y2 + h) - pair.boundary_divergence(0.3, y1, y2 - h)) / (2 * h)
    assert np.allclose(grad[0], fd1, atol=1e-6)
    assert np.allclose(grad[1], fd2, atol=1e-6)


def test_corrector_bounds_are_finite(fmap, triple):
    flow = manufactured_euler("shear", 1.0, 1.0)
    rows = wprop_report(build_correctors(flow, triple, fmap), flow)
    assert len(rows) == 9
    assert all(np.isfinite(r.ratio) for r in rows)


def test_bound_row_ratio():
    assert BoundRow("x", 1.0, 4.0).ratio == 0.25
    assert BoundRow("x", 0.0, 0.0).ratio == 0.0
    assert BoundRow("x", 1.0, 0.0).ratio == np.inf
