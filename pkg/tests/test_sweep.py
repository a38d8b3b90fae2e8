import csv
import json
from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest

import lamina.sweep
from lamina.audit import BOUND_NAMES, write_record_csv
from lamina.config import GeometricGrid, RunConfig, SweepBlock
from lamina.errors import ConfigurationError, InsufficientDataError, ValidationError
from lamina.run import run_nickname
from lamina.sweep import aggregate, build_points, cmd_sweep, fit_rates, point_config, sweep_triples


def with_sweep(**kwargs) -> RunConfig:
    return RunConfig(sweep=SweepBlock(**kwargs))


def test_paired_sweep_follows_eta():
    etas = GeometricGrid(start=0.08, ratio=0.5, count=3)
    triples = sweep_triples(with_sweep(eta=etas, nu_power=3.0, delta_match_eta=True))
    assert triples == [(e, e**3, e) for e in etas.values()]


def test_paired_sweep_repeats_a_single_eta():
    config = with_sweep(nu=GeometricGrid(start=1e-3, ratio=0.5, count=2))
    assert sweep_triples(config) == [(1e-2, 1e-3, 0.0625), (1e-2, 5e-4, 0.0625)]


def test_product_sweep_order():
    config = with_sweep(
        mode="product",
        eta=GeometricGrid(start=0.04, ratio=0.5, count=2),
        nu=GeometricGrid(start=1e-3, ratio=0.5, count=2),
    )
    assert sweep_triples(config) == [
        (0.04, 1e-3, 0.0625),
        (0.04, 5e-4, 0.0625),
        (0.02, 1e-3, 0.0625),
        (0.02, 5e-4, 0.0625),
    ]


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(nu=GeometricGrid(), nu_power=3.0),
        dict(delta=GeometricGrid(), delta_match_eta=True),
        dict(mode="diagonal"),
        dict(eta=GeometricGrid(count=3), nu=GeometricGrid(count=2)),
    ],
)
def test_inconsistent_sweeps(kwargs):
    with pytest.raises(ConfigurationError):
        sweep_triples(with_sweep(**kwargs))


def test_point_config_shifts_the_seed():
    config = RunConfig(seed=5)
    point = point_config(config, 3, 0.02, 1e-4, 0.05)
    assert point.seed == 8
    assert (point.viscosity.eta, point.viscosity.nu, point.geometry.delta) == (0.02, 1e-4, 0.05)
    assert config.viscosity.eta == 1e-2


def test_build_points_marks_inadmissible_triples():
    config = with_sweep(delta=GeometricGrid(start=0.05, ratio=4.0, count=2))
    points = build_points(config)
    assert [p.admissible for p in points] == [True, False]
    assert points[1].reason == "δ ∈ (0, δ₀) violated"
    assert points[0].nickname != points[1].nickname


def test_fit_rates_recovers_the_power():
    budgets = np.array([0.1, 0.2, 0.4, 0.8])
    records = [SimpleNamespace(budget=b, sup_error=0.5 * b**2, m=0.5 * b) for b in budgets]
    fit = fit_rates(records)
    assert fit["error_slope"] == pytest.approx(2.0)
    assert fit["m_spread"] == pytest.approx(8.0)
    assert not fit["m_stable"]


def test_fit_rates_with_one_positive_error():
    records = [SimpleNamespace(budget=0.1, sup_error=0.0, m=0.0), SimpleNamespace(budget=0.2, sup_error=0.1, m=0.5)]
    fit = fit_rates(records)
    assert np.isnan(fit["error_slope"])
    assert fit["m_spread"] == np.inf


def finish(point, out, record):
    """Lay out a run directory the way ``run`` leaves it."""
    savedir = out / point.nickname
    savedir.mkdir(parents=True)
    write_record_csv([record], savedir / "record.csv", extra={"nickname": point.nickname})
    bounds = {name: {"max_ratio": 1.0, "mean_ratio": 0.5} for name in BOUND_NAMES}
    (savedir / f"{point.nickname}-info.json").write_text(json.dumps({"bounds": bounds}))
    point.returncode = 0


def test_aggregate(tmp_path, make_record):
    config = with_sweep(eta=GeometricGrid(start=0.08, ratio=0.5, count=3), nu_power=3.0, delta_match_eta=True)
    points = build_points(config)
    assert all(p.admissible for p in points)
    finish(points[0], tmp_path, make_record(budget=0.4, sup_error=0.2, m=0.5))
    finish(points[1], tmp_path, make_record(budget=0.2, sup_error=0.05, m=0.25))
    points[2].returncode = 2

    fit = aggregate(points, tmp_path)
    assert fit["error_slope"] == pytest.approx(2.0)
    assert fit["growing_bounds"] == []

    with open(tmp_path / "sweep.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert [r["status"] for r in rows] == ["finished", "finished", "failed"]
    assert rows[2]["m"] == ""
    with open(tmp_path / "budget.csv", newline="") as f:
        assert len(list(csv.DictReader(f))) == 2


def test_aggregate_needs_two_runs(tmp_path, make_record):
    points = build_points(with_sweep(eta=GeometricGrid(start=0.08, ratio=0.5, count=2), nu_power=3.0, delta_match_eta=True))
    finish(points[0], tmp_path, make_record())
    points[1].returncode = 0
    with pytest.raises(InsufficientDataError):
        aggregate(points, tmp_path)
    with open(tmp_path / "sweep.csv", newline="") as f:
        assert [r["status"] for r in csv.DictReader(f)] == ["finished", "missing"]


def test_nickname_ignores_the_output_directory():
    assert run_nickname(RunConfig(output="a")) == run_nickname(RunConfig(output="b"))
    assert run_nickname(RunConfig(seed=1)) != run_nickname(RunConfig(seed=2))


@pytest.mark.parametrize("seed", range(200))
def test_sweep_points_get_distinct_directories(seed):
    config = RunConfig(seed=seed, sweep=SweepBlock(eta=GeometricGrid(start=0.08, ratio=0.5, count=6), nu_power=3.0, delta_match_eta=True))
    names = {run_nickname(point_config(config, i, *triple)) for i, triple in enumerate(sweep_triples(config))}
    assert len(names) == 6


def test_build_points_rejects_a_shared_directory(monkeypatch):
    monkeypatch.setattr(lamina.sweep, "run_nickname", lambda config: "calm_pool_0000")
    config = with_sweep(eta=GeometricGrid(start=0.08, ratio=0.5, count=2), nu_power=3.0, delta_match_eta=True)
    with pytest.raises(ConfigurationError, match="points 0 and 1 share the run directory calm_pool_0000"):
        build_points(config)


def test_sweep_needs_four_admissible_points(tmp_path):
    config = with_sweep(eta=GeometricGrid(start=0.08, ratio=0.5, count=3), nu_power=3.0, delta_match_eta=True)
    config = replace(config, output=str(tmp_path))
    with pytest.raises(ValidationError, match="at least 4"):
        cmd_sweep(config)
    assert not (tmp_path / "sweep-configs").exists()
