import math
from dataclasses import replace

import numpy as np
import pytest

from lamina import console
from lamina.errors import ConfigurationError, DomainError, GridMismatchError, ValidationError
from lamina.experiment import build_experiment
from lamina.fields import (
    Field,
    Grid,
    d3,
    differentiate,
    divergence,
    grad,
    gradient,
    graded_nodes,
    inner,
    norm,
    spectral_derivative,
    spectral_l2,
    weak_divergence,
)


@pytest.fixture
def grid():
    return Grid.graded(8, 8, 12, 3.0, 0.05, max_ratio=1.3)


def test_grid_needs_powers_of_two():
    with pytest.raises(ConfigurationError):
        Grid.uniform(12, 8, 8, 1.0)
    with pytest.raises(ConfigurationError):
        Grid.uniform(8, 8, 3, 1.0)


def test_graded_nodes():
    z = graded_nodes(4.0, 0.01, 16, max_ratio=1.1)
    steps = np.diff(z)
    assert z[0] == 0.0 and z[-1] == pytest.approx(4.0)
    assert steps[0] == pytest.approx(0.01, rel=1e-6)
    assert np.all(steps[1:-1] / steps[:-2] <= 1.1 + 1e-9)
    # The ratio bound forces more nodes than asked for
    assert z.size > 16


def test_graded_nodes_fall_back_to_uniform():
    z = graded_nodes(1.0, 0.5, 5)
    assert np.allclose(z, np.linspace(0, 1, 5))


def test_spectral_derivative_is_exact(grid):
    x1, x2, _ = grid.coords()
    data = np.broadcast_to(np.sin(x1) * np.cos(2 * x2), grid.shape).copy()
    assert np.allclose(spectral_derivative(data, grid, 1), np.cos(x1) * np.cos(2 * x2), atol=1e-12)
    assert np.allclose(spectral_derivative(data, grid, 2), -2 * np.sin(x1) * np.sin(2 * x2), atol=1e-12)


def test_vertical_derivative_exact_on_quadratics(grid):
    z = np.broadcast_to(grid.coords()[2], grid.shape)
    assert np.allclose(d3(z**2 - 3 * z, grid), 2 * z - 3, atol=1e-10)


def test_weak_divergence_is_negative_adjoint_of_grad(grid):
    rng = np.random.default_rng(3)
    q = rng.standard_normal((3,) + grid.shape)
    p = rng.standard_normal(grid.shape)
    lhs = inner(weak_divergence(q, grid), p, grid)
    rhs = -inner(q, grad(p, grid), grid)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_l2_norm_of_constant(grid):
    one = Field(grid, np.ones(grid.shape))
    assert norm(one) == pytest.approx(math.sqrt(grid.period**2 * grid.height))
    assert norm(one, "trace-L2") == pytest.approx(grid.period)
    assert norm(one, "H1") == pytest.approx(norm(one))


def test_parseval(grid):
    f = Field(grid, np.random.default_rng(5).standard_normal((3,) + grid.shape))
    assert spectral_l2(f) == pytest.approx(norm(f), rel=1e-12)


def test_weighted_norm(grid):
    one = Field(grid, np.ones(grid.shape))
    # Trapezoid of z^0 weight equals the plain L2 norm
    assert norm(one, "weighted-L2", gamma=0.0) == pytest.approx(norm(one))


def test_field_validation(grid):
    with pytest.raises(GridMismatchError):
        Field(grid, np.zeros((2,) + grid.shape))
    with pytest.raises(GridMismatchError):
        Field(grid, np.zeros((8, 8, 5)))
    bad = np.zeros(grid.shape)
    bad[0, 0, 0] = np.nan
    with pytest.raises(ValidationError):
        Field(grid, bad)


def test_field_arithmetic(grid):
    a = Field(grid, np.ones((3,) + grid.shape))
    b = 2 * a - a
    assert np.all(b.data == 1.0)
    other = Grid.uniform(8, 8, 12, 3.0)
    with pytest.raises(GridMismatchError):
        a + Field(other, np.ones((3,) + other.shape))


def test_field_operations(grid):
    x1, _, _ = grid.coords()
    s = Field(grid, np.broadcast_to(np.sin(x1), grid.shape).copy())
    assert np.allclose(differentiate(s, 1).data[0], np.cos(x1))
    g = gradient(s)
    assert g.components == 3
    assert divergence(g).components == 1
    with pytest.raises(DomainError):
        divergence(s)
    with pytest.raises(DomainError):
        gradient(g)
    with pytest.raises(DomainError):
        norm(s, "H7")


def test_resolution_report(grid):
    report = grid.resolution_report(layer_width=1.0, oscillation_period=None)
    assert report["layer_resolved"]
    assert report["oscillation_resolved"]
    assert not grid.resolution_report(1e-3, 0.01)["oscillation_resolved"]
    # The lid must clear four layer widths and four wall heights, and 1
    assert report["min_height"] == 4.0
    assert not report["height_ok"]
    assert grid.resolution_report(0.1, None)["height_ok"]
    assert not grid.resolution_report(0.1, None, wall_height=1.0)["height_ok"]


def test_low_lid_is_reported(small_config, monkeypatch, capsys):
    monkeypatch.setattr(console, "QUIET", False)
    config = replace(small_config, grid=replace(small_config.grid, height=0.5))
    assert build_experiment(config).grid.height == 0.5
    assert "Lid height 0.5 is below 1;" in capsys.readouterr().out
