import math

import numpy as np
import pytest

from lamina.audit import (
    BOUND_NAMES,
    TERM_NAMES,
    BoundSummary,
    ClosedFormFields,
    ConvergenceRecord,
    EnergyAudit,
    EnergyLedger,
    compute_v,
    convergence_metrics,
    gronwall_envelope,
    ledger_columns,
    bound_ratio_report,
    measured_coefficients,
    ratio_growth,
    read_record_csv,
    write_ledger_csv,
    write_record_csv,
)
from lamina.errors import CheckFailure, DomainError, GridMismatchError, InsufficientDataError
from lamina.fields import Field
from lamina.solver import solve, start_run


@pytest.fixture(scope="module")
def audited_run(shared_experiment):
    """One short audited run shared by the tests below."""
    experiment = shared_experiment
    solver, state, report = start_run(experiment)
    cf = ClosedFormFields(experiment.grid, experiment.flow, experiment.pair, experiment.layer)
    audit = EnergyAudit(solver, cf, experiment.params)
    audit.start(state)
    trajectory = solve(solver, state, experiment.config.time.t_final, observers=[audit])
    return experiment, solver, cf, audit.ledger, trajectory, report


def test_envelope_without_growth_is_constant():
    times = np.linspace(0, 1, 5)
    zero = np.zeros(5)
    env = gronwall_envelope(times, zero, zero, zero, 0.5, 2.0)
    assert np.allclose(env.y, 0.25)
    assert env.m == pytest.approx(0.25)


def test_envelope_exponential_growth():
    times = np.linspace(0, 2, 9)
    zero = np.zeros(9)
    env = gronwall_envelope(times, np.full(9, 0.8), zero, zero, 1.5, 1.0)
    assert np.allclose(env.bound, 1.5 * np.exp(0.4 * times), rtol=1e-8)
    assert env.m == pytest.approx(1.5 * math.exp(0.8), rel=1e-8)


def test_envelope_constant_source():
    times = np.linspace(0, 1, 3)
    zero = np.zeros(3)
    env = gronwall_envelope(times, zero, zero, np.full(3, 3.0), 1.0, 1.0)
    assert np.allclose(env.y, 1.0 + 3.0 * times)


@pytest.mark.parametrize(
    "f0, f_init, gamma",
    [
        ([-1.0, 0.0], 1.0, 1.0),
        ([0.0, 0.0], -1.0, 1.0),
        ([0.0, 0.0], 1.0, 0.0),
    ],
)
def test_envelope_domain(f0, f_init, gamma):
    with pytest.raises(DomainError):
        gronwall_envelope([0.0, 1.0], f0, [0.0, 0.0], [0.0, 0.0], f_init, gamma)


def test_envelope_needs_two_samples():
    with pytest.raises(InsufficientDataError):
        gronwall_envelope([0.0], [0.0], [0.0], [0.0], 1.0, 1.0)
    with pytest.raises(InsufficientDataError):
        gronwall_envelope([0.0, 1.0], [0.0], [0.0, 0.0], [0.0, 0.0], 1.0, 1.0)


def test_measured_coefficients():
    terms = {name: 0.0 for name in TERM_NAMES}
    terms["velocity_gradient_stretch"] = -0.5
    terms["layer_advection"] = 0.25
    terms["diffusion_cross"] = 1.0
    f0, f1, f2 = measured_coefficients(terms, dissipation=0.75, defect=-0.01, v_norm=2.0)
    assert f0 == pytest.approx(0.25)
    assert f1 == pytest.approx(0.25)
    assert f2 == pytest.approx(0.52)
    # A vanishing error puts everything in the source term
    assert measured_coefficients(terms, 0.75, -0.01, 0.0) == (0.0, 0.0, pytest.approx(0.52 + 1.0 + 0.5))


def test_v_of_the_reference_itself_vanishes(small_experiment):
    e = small_experiment
    grid = e.grid
    y = grid.coords()
    t = 0.3
    u = Field(grid, np.broadcast_to(e.pair.velocity(t, *y) + e.layer.value(t, *y), (3,) + grid.shape).copy(), t)
    assert np.max(np.abs(compute_v(u, e.pair, e.layer, t).data)) <= 1e-14
    cf = ClosedFormFields(grid, e.flow, e.pair, e.layer)
    assert np.max(np.abs(cf.v(u.data, t))) <= 1e-12


def test_v_needs_a_velocity(small_experiment):
    e = small_experiment
    with pytest.raises(GridMismatchError):
        compute_v(Field(e.grid, np.zeros(e.grid.shape)), e.pair, e.layer, 0.0)


def test_ledger_has_a_row_per_step(audited_run):
    _, _, _, ledger, trajectory, _ = audited_run
    assert len(ledger.rows) == trajectory.steps == 4
    assert len(ledger.samples) == 5
    assert np.allclose(ledger.times, trajectory.times)
    for row in ledger.rows:
        assert row.dissipation >= 0
        assert row.defect == pytest.approx(row.lhs - row.rhs)
        assert set(row.bounds) == set(BOUND_NAMES)
        assert min(row.f0, row.f1, row.f2) >= 0


def test_bound_summaries(audited_run):
    _, _, _, ledger, _, _ = audited_run
    report = bound_ratio_report(ledger)
    assert [b.name for b in report] == list(BOUND_NAMES)
    assert all(b.max_ratio >= b.mean_ratio >= 0 for b in report)


def test_bound_summaries_need_steps(small_experiment):
    with pytest.raises(InsufficientDataError):
        bound_ratio_report(EnergyLedger(small_experiment.params))


def test_ratio_growth_flags_a_growing_bound():
    def report(ratio):
        return [BoundSummary(name, 1.0, ratio if name == "diffusion_cross" else 1.0, 1.0) for name in BOUND_NAMES]

    growth = ratio_growth([report(1.0), report(2.0), report(10.0)])
    assert growth["diffusion_cross"] == (10.0, True)
    assert growth["layer_stretch"] == (1.0, False)


def test_convergence_record(audited_run, tmp_path):
    experiment, _, cf, ledger, trajectory, report = audited_run
    record = convergence_metrics(ledger, trajectory, cf, report.initial_error_l2)
    p = experiment.params
    assert record.steps == 4
    assert record.budget == pytest.approx(p.beta_value + p.delta**0.5)
    assert record.m == pytest.approx(record.sup_error / record.budget)
    assert record.initial_error == report.initial_error_l2
    assert record.envelope_m > 0
    assert len(ConvergenceRecord.columns()) == 33

    path = write_record_csv([record], tmp_path / "record.csv", extra={"run": "quiet_lamina"})
    [(extra, loaded)] = read_record_csv(path)
    assert extra == {"run": "quiet_lamina"}
    assert loaded == record


def test_record_rejects_non_finite_entries(audited_run):
    experiment, _, cf, ledger, trajectory, report = audited_run
    record = convergence_metrics(ledger, trajectory, cf, report.initial_error_l2)
    record.m = math.nan
    with pytest.raises(CheckFailure):
        record.validate()


def test_metrics_need_a_step(small_experiment):
    with pytest.raises(InsufficientDataError):
        convergence_metrics(EnergyLedger(small_experiment.params), None, None, 0.0)


def test_ledger_csv(audited_run, tmp_path):
    _, _, _, ledger, _, _ = audited_run
    path = write_ledger_csv(ledger, tmp_path / "ledger.csv")
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == ledger_columns()
    assert len(lines) == 5
