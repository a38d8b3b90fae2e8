"""Static verifications: everything that needs no time stepping."""
import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

from lamina import console
from lamina.audit import format_cell
from lamina.config import RunConfig
from lamina.constants import BOX_PERIOD
from lamina.errors import CheckFailure, ValidationError
from lamina.experiment import Experiment, build_experiment
from lamina.flow import wprop_report
from lamina.layer import bl_divergence_residual, bl_scaling_report, normal_flux_residual, separable_identity_gap
from lamina.params import smallness_holds, smallness_value, theta_condition_holds
from lamina.profiles import SCALED_KINDS, fitted_slopes
from lamina.viscosity import sandwich_check


@dataclass
class CheckRow:
    group: str
    name: str
    value: float
    threshold: float
    passed: bool
    required: bool = True
    detail: str = ""
    witness: dict = field(default_factory=dict, repr=False)


def _at_most(group, name, value, threshold, required=True, detail=""):
    return CheckRow(group, name, float(value), threshold, bool(value <= threshold), required, detail)


def _at_least(group, name, value, threshold, required=True, detail=""):
    return CheckRow(group, name, float(value), threshold, bool(value >= threshold), required, detail)


def admissibility_rows(exp: Experiment) -> list:
    p, profile = exp.params, exp.profile
    lipschitz = profile.lipschitz_constant() if profile.kind != "flat" else 0.0
    small = smallness_value(p, lipschitz)
    return [
        CheckRow("params", "admissible", 1.0, 1.0, True, detail=f"beta = {p.beta_value:.6g}, theta*nu = {p.theta * p.nu:.6g}"),
        CheckRow("params", "smallness", small, 0.25, smallness_holds(p, lipschitz), required=False, detail=f"L = {lipschitz:.6g}"),
        CheckRow(
            "params",
            "theta_condition",
            p.theta,
            p.lam**2 * p.epsilon**2 * p.eta / (4 * p.w0_sup_norm**2),
            theta_condition_holds(p, p.w0_sup_norm),
            required=False,
        ),
    ]


def sandwich_rows(exp: Experiment) -> list:
    c = exp.config
    try:
        report = sandwich_check(
            exp.viscosity,
            exp.fmap,
            exp.params,
            samples=c.check.sandwich_samples,
            eigen_points=c.check.eigen_points,
            height=c.grid.height,
            t_final=c.time.t_final,
            seed=c.seed,
        )
    except CheckFailure as e:
        row = CheckRow("sandwich", "lower_ratio", e.witness.get("ratio", math.nan), exp.viscosity.lam / 2, False, detail=str(e))
        row.witness = e.witness
        return [row]
    return [
        _at_least("sandwich", "lower_ratio", report.min_lower, report.bound, detail=f"{report.samples} samples"),
        _at_most("sandwich", "eigen_agreement", report.eigen_agreement, 0.05, detail=f"exact min {report.eigen_min:.6g}"),
        CheckRow("sandwich", "upper_ratio", report.max_upper, math.inf, True, required=False),
        CheckRow("sandwich", "cross_ratio", report.max_cross, math.inf, True, required=False),
    ]


def profile_rows(exp: Experiment) -> list:
    pair = exp.profiles
    edges = np.linspace(0.0, 1.0, 4097)
    beyond = np.linspace(1.0, 4.0, 1001)[1:]
    derivative_gap = float(np.max(np.abs(pair._psi_spline.derivative()(edges) - pair.phi(edges))))
    mean = integrate.quad(lambda z: float(pair.phi(z)), 0.0, 1.0, epsabs=1e-14, limit=200)[0]
    slopes = fitted_slopes(pair, [1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    slope_gap = max(abs(slopes[k] - SCALED_KINDS[k]) for k in SCALED_KINDS)
    return [
        _at_most("profiles", "phi_at_zero", abs(float(pair.phi(0.0)) - 1.0), 1e-12),
        _at_most("profiles", "psi_at_zero", abs(float(pair.psi(0.0))), 1e-12),
        _at_most("profiles", "psi_at_one", abs(float(pair.psi(1.0 - 1e-12))), 1e-10),
        _at_most("profiles", "psi_derivative", derivative_gap, 1e-10),
        _at_most("profiles", "phi_mean", abs(mean), 1e-10, detail=f"lambda = {pair.lam!r}"),
        _at_most("profiles", "support", float(np.max(np.abs(pair.phi(beyond))) + np.max(np.abs(pair.psi(beyond)))), 0.0),
        _at_most("profiles", "scaling_slopes", slope_gap, 1e-6),
    ]


def _random_points(rng, count, height):
    y1, y2 = rng.uniform(0.0, BOX_PERIOD, (2, count))
    return y1, y2, rng.uniform(0.0, height, count)


def flow_rows(exp: Experiment) -> list:
    c = exp.config
    flow, pair = exp.flow, exp.pair
    rng = np.random.default_rng(c.seed)
    y1, y2, y3 = _random_points(rng, c.check.identity_samples, c.grid.height)
    zero = np.zeros_like(y1)
    times = np.linspace(0.0, c.time.t_final, 3)
    div0 = max(float(np.max(np.abs(flow.divergence(t, y1, y2, y3)))) for t in times)
    euler = max(float(np.max(np.abs(flow.euler_residual(t, y1, y2, y3)))) for t in times)
    normal = float(np.max(np.abs(flow.initial(y1, y2, zero)[2])))
    tilde_gap = float(np.max(np.abs(pair.tilde(0.0, y1, y2, y3)[:2] + flow.velocity(0.0, y1, y2, y3)[:2])))
    bdiv = max(float(np.max(np.abs(pair.b_divergence(t, y1, y2, y3)))) for t in times)
    flux = max(float(np.max(np.abs(pair.wall_flux(t, y1, y2)))) for t in times)
    rows = [
        _at_most("flow", "divergence", div0, 1e-12),
        _at_most("flow", "euler_residual", euler, 1e-12),
        _at_most("flow", "wall_normal", normal, 1e-12),
        _at_most("correctors", "tangential_identity", tilde_gap, 0.0),
        _at_most("correctors", "b_divergence", bdiv, 1e-10),
        _at_most("correctors", "wall_flux", flux, 1e-12),
    ]
    for bound in wprop_report(pair, flow):
        rows.append(CheckRow("correctors", bound.name, bound.ratio, math.inf, math.isfinite(bound.ratio), detail=f"lhs {bound.lhs:.6g}, rhs {bound.rhs:.6g}"))
    return rows


def _slope_note(row) -> str:
    if row.negligible:
        return ", negligible"
    return "" if row.sharp else ", not sharp"


def layer_rows(exp: Experiment) -> list:
    c = exp.config
    bl = exp.layer
    rows = [
        _at_most("layer", "b_divergence", bl_divergence_residual(bl, c.check.identity_samples, c.seed, (0.0, c.time.t_final / 2, c.time.t_final)), 1e-10),
        _at_most("layer", "normal_flux", normal_flux_residual(bl, c.check.identity_samples, c.seed), 1e-12),
        _at_most("layer", "separable_identity", separable_identity_gap(bl), 1e-8),
    ]
    for row in bl_scaling_report(exp.pair, exp.profiles, exp.params, c.check.theta_nu.values(), w0_norm=exp.params.w0_sup_norm):
        rows.append(
            CheckRow(
                "layer_scaling",
                row.quantity,
                row.fitted_slope,
                row.target_slope,
                row.passed,
                detail=f"max ratio {row.max_ratio:.6g}, grid gap {row.cross_check:.3g}{_slope_note(row)}",
            )
        )
    return rows


CHECK_GROUPS = (admissibility_rows, sandwich_rows, profile_rows, flow_rows, layer_rows)


def write_check_csv(rows: list, path):
    with open(path, "w", newline="") as out:
        writer = csv.writer(out)
        writer.writerow(["group", "name", "value", "threshold", "passed", "required", "detail"])
        for r in rows:
            writer.writerow([r.group, r.name, format_cell(r.value), format_cell(r.threshold), format_cell(r.passed), format_cell(r.required), r.detail])
    return path


def run_checks(config: RunConfig) -> list:
    exp = build_experiment(config)
    if not exp.verdict:
        raise ValidationError(f"inadmissible triple (eta, nu, delta) = ({config.viscosity.eta}, {config.viscosity.nu}, {config.geometry.delta}): {exp.verdict.reason}")
    rows = []
    for group in CHECK_GROUPS:
        console.info(f"Checking {group.__name__.replace('_rows', '')}")
        rows.extend(group(exp))
    return rows


def cmd_check(config: RunConfig) -> int:
    """Run every static check, write <output>/check.csv, raise CheckFailure on the first required failure."""
    rows = run_checks(config)
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    write_check_csv(rows, out / "check.csv")

    for r in rows:
        line = f"{r.group:>14} {r.name:<28} {r.value:>14.6g}  (threshold {r.threshold:.3g}) {r.detail}"
        if r.passed:
            console.info(line)
        elif r.required:
            console.fail(line)
        else:
            console.warn(line)

    failures = [r for r in rows if r.required and not r.passed]
    if failures:
        first = failures[0]
        raise CheckFailure(
            f"{len(failures)} check(s) failed, first: {first.group}.{first.name} = {first.value:.6g} (threshold {first.threshold:.3g})",
            witness=first.witness or {"group": first.group, "name": first.name, "value": first.value},
        )
    console.done(f"All {len(rows)} checks passed")
    return 0
