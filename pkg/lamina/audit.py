"""Energy audit of a run.

v = u - w - layer is the error against the corrected reference flow. Every step
the audit evaluates

    1/2 d/dt ||v||^2 + <A grad v, grad v> = sum of named terms

at the step midpoint, measures the coefficients of the differential inequality
d/dt ||v||^2 <= f0 ||v||^2 + f1 ||v|| + f2, and checks each term against the
shape of its bound. After the run the Gronwall envelope and the convergence
metrics are built from the ledger.
"""
import csv
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np
import scipy.integrate

from lamina.errors import CheckFailure, DomainError, GridMismatchError, InsufficientDataError
from lamina.fields import Field, Grid, grad, inner
from lamina.flow import BoundRow, CorrectorPair, ReferenceFlow
from lamina.layer import BoundaryLayerField
from lamina.params import ParamTriple, theta_condition_holds

# Right-hand side of the identity, in ledger column order
TERM_NAMES = (
    "layer_advection",
    "velocity_gradient_stretch",
    "layer_time_derivative",
    "transport_skew",
    "diffusion_cross",
    "layer_stretch",
    "forcing_mismatch",
    "corrector_time",
    "corrector_transport",
    "corrector_stretch",
    "oscillation_advection",
    "pressure_gradient",
    "pressure_work",
)
CORRECTOR_TERMS = ("corrector_time", "corrector_transport", "corrector_stretch")
# Terms quadratic in v; they make up f0
QUADRATIC_TERMS = ("velocity_gradient_stretch", "layer_stretch")
BOUND_NAMES = (
    "layer_advection",
    "velocity_gradient_stretch",
    "layer_time_derivative",
    "diffusion_cross",
    "layer_stretch",
    "corrector_terms",
    "oscillation_terms",
)
DISSIPATION_FLOOR = -1e-12


def _transport(a, gradient):
    """(a . grad) f for a closed-form gradient laid out [i, j] = D_j f_i."""
    return np.einsum("j...,ij...->i...", a, gradient)


def _grid_transport(a, gradient):
    """(a . grad) f for a grid gradient laid out [j, i] = D_j f_i."""
    return np.einsum("j...,ji...->i...", a, gradient)


def compute_v(u: Field, pair: CorrectorPair, bl: BoundaryLayerField, t: float) -> Field:
    """u - w(t) - layer(t) with w and the layer sampled at the nodes of u."""
    if u.components != 3:
        raise GridMismatchError("the error field needs a velocity with 3 components")
    y = u.grid.coords()
    return u.with_data(u.data - pair.velocity(t, *y) - bl.value(t, *y), time=t)


class ClosedFormFields:
    """w, w~, the layer and their gradients on a grid.

    All of them are tau(t) times a fixed spatial field, so the spatial parts
    are sampled once and rescaled per time.
    """

    def __init__(self, grid: Grid, flow: ReferenceFlow, pair: CorrectorPair, bl: BoundaryLayerField):
        self.grid = grid
        self.flow = flow
        self.pair = pair
        self.bl = bl
        y = grid.coords()
        scale = 1.0 / float(flow.temporal(0.0))
        full = (3,) + grid.shape
        self.w0 = np.broadcast_to(flow.shape.velocity(*y), full)
        self.w = np.broadcast_to(pair.velocity_spatial(*y), full)
        self.w_grad = np.broadcast_to(pair.gradient_spatial(*y), (3,) + full)
        self.tilde = scale * np.broadcast_to(pair.tilde(0.0, *y), full)
        self.tilde_grad = scale * np.broadcast_to(pair.tilde_gradient(0.0, *y), (3,) + full)
        self.layer = scale * np.broadcast_to(bl.value(0.0, *y), full)
        self.layer_grad = scale * np.broadcast_to(bl.gradient(0.0, *y), (3,) + full)
        self.pressure_gradient = np.broadcast_to(flow.pressure_gradient(0.0, *y), full)

    def tau(self, t):
        return float(self.flow.temporal(t))

    def tau_dt(self, t):
        return float(self.flow.temporal_dt(t))

    def v(self, u: np.ndarray, t: float) -> np.ndarray:
        return u - self.tau(t) * (self.w + self.layer)

    def at(self, name: str, t: float) -> np.ndarray:
        return self.tau(t) * getattr(self, name)


def energy_terms(solver, cf: ClosedFormFields, u: np.ndarray, p: np.ndarray, t: float) -> dict:
    """Named right-hand-side terms of the energy identity for velocity u and pressure p at time t."""
    grid, slopes = solver.grid, solver.slopes
    tau, dtau = cf.tau(t), cf.tau_dt(t)
    s = cf.pair.scale
    v = cf.v(u, t)
    w, layer, w0 = tau * cf.w, tau * cf.layer, tau * cf.w0
    gw, glayer, gtilde = tau * cf.w_grad, tau * cf.layer_grad, tau * cf.tilde_grad
    gv = grad(v, grid)
    bu, bv, bw, blayer = (slopes.apply(x) for x in (u, v, w, layer))

    def pair_with_v(x):
        return inner(x, v, grid)

    A = solver.matrix(t)
    cross = np.einsum("jk...,ki...->ji...", A, grad(w + layer, grid))
    forcing = solver.forcing(t)
    reference = solver.forcing.reference(t) if hasattr(solver.forcing, "reference") else forcing
    # B w - w = e3 (b31 w1 + b32 w2)
    oscillation = (bw - w)[2] * gw[:, 2]

    corrections = np.zeros_like(v)
    corrections[0] = slopes.b31 * cf.pressure_gradient[2]
    corrections[1] = slopes.b32 * cf.pressure_gradient[2]

    return {
        "layer_advection": -pair_with_v(_transport(bw, glayer) + _transport(blayer, glayer) + _transport(blayer, gw)),
        "velocity_gradient_stretch": -pair_with_v(_transport(bv, gw)),
        "layer_time_derivative": -pair_with_v(dtau * cf.layer),
        "transport_skew": -pair_with_v(_grid_transport(bu, gv)),
        "diffusion_cross": -inner(cross, gv, grid),
        "layer_stretch": -pair_with_v(_transport(bv, glayer)),
        "forcing_mismatch": pair_with_v(forcing - reference),
        "corrector_time": s * pair_with_v(dtau * cf.tilde),
        "corrector_transport": s * pair_with_v(_transport(w0, gtilde)),
        "corrector_stretch": s * pair_with_v(_transport(tau * cf.tilde, gw)),
        "oscillation_advection": -pair_with_v(oscillation),
        "pressure_gradient": pair_with_v(cf.pressure_gradient),
        "pressure_work": -pair_with_v(solver.projector.correction(p)),
        # Same pairing written through the wall slopes; equal to pressure_gradient for admissible v
        "pressure_gradient_slopes": -pair_with_v(corrections),
    }


@dataclass
class LedgerRow:
    step: int
    t: float
    dt: float
    v_sq: float
    dissipation: float
    lhs: float
    rhs: float
    defect: float
    terms: dict
    f0: float
    f1: float
    f2: float
    bounds: dict = field(default_factory=dict)


@dataclass
class TimeSample:
    """Norms at one time level of the trajectory."""

    t: float
    v_l2: float
    error_l2: float  # ||u - w0||
    layer_l2: float
    u_tangential_sq: float  # ||D' u||^2
    u_normal_sq: float  # ||D3 u||^2
    v_gradient_sq: float  # eta ||D' v||^2 + nu ||D3 v||^2
    w_gradient_sq: float
    layer_gradient_sq: float
    physical_dissipation: float  # <A grad u, grad u>


@dataclass
class EnergyLedger:
    params: ParamTriple
    rows: list = field(default_factory=list)
    samples: list = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def series(self, name: str) -> np.ndarray:
        if name in ("f0", "f1", "f2"):
            return np.array([getattr(r, name) for r in self.rows])
        return np.array([getattr(s, name) for s in self.samples])

    @property
    def max_defect(self) -> float:
        return max((abs(r.defect) for r in self.rows), default=0.0)


def _split_gradient_sq(g, eta, nu, grid):
    tangential = inner(g[:2], g[:2], grid)
    normal = inner(g[2], g[2], grid)
    return tangential, normal, eta * tangential + nu * normal


class EnergyAudit:
    """Observer for lamina.solver.solve: one LedgerRow per step, one TimeSample per level."""

    def __init__(self, solver, cf: ClosedFormFields, p: ParamTriple):
        self.solver = solver
        self.cf = cf
        self.p = p
        self.ledger = EnergyLedger(p)
        self.theta_nu = p.theta * p.nu

    def sample(self, u: np.ndarray, t: float) -> TimeSample:
        grid, cf, p = self.solver.grid, self.cf, self.p
        tau = cf.tau(t)
        v = cf.v(u, t)
        error = u - tau * cf.w0
        layer = tau * cf.layer
        gu = grad(u, grid)
        ut, un, _ = _split_gradient_sq(gu, p.eta, p.nu, grid)
        *_, vg = _split_gradient_sq(grad(v, grid), p.eta, p.nu, grid)
        # Closed-form gradients are laid out [i, j]; move j to the front
        *_, wg = _split_gradient_sq(np.swapaxes(tau * cf.w_grad, 0, 1), p.eta, p.nu, grid)
        *_, lg = _split_gradient_sq(np.swapaxes(tau * cf.layer_grad, 0, 1), p.eta, p.nu, grid)
        return TimeSample(
            t=t,
            v_l2=math.sqrt(inner(v, v, grid)),
            error_l2=math.sqrt(inner(error, error, grid)),
            layer_l2=math.sqrt(inner(layer, layer, grid)),
            u_tangential_sq=ut,
            u_normal_sq=un,
            v_gradient_sq=vg,
            w_gradient_sq=wg,
            layer_gradient_sq=lg,
            physical_dissipation=self.solver.dissipation(u, self.solver.matrix(t)),
        )

    def start(self, state):
        self.ledger.samples.append(self.sample(state.u.data, state.t))

    def __call__(self, previous, current):
        if not self.ledger.samples:
            self.start(previous)
        solver, cf = self.solver, self.cf
        dt = current.t - previous.t
        t_mid = previous.t + dt / 2
        v0, v1 = cf.v(previous.u.data, previous.t), cf.v(current.u.data, current.t)
        v_mid = 0.5 * (v0 + v1)
        u_mid = 0.5 * (previous.u.data + current.u.data)

        dissipation = solver.dissipation(v_mid, solver.matrix(t_mid))
        if dissipation < DISSIPATION_FLOOR:
            raise CheckFailure(
                f"negative dissipation {dissipation:.3e} at t = {t_mid:.6g}",
                witness={"t": t_mid, "dissipation": dissipation},
            )
        v0_sq, v1_sq = inner(v0, v0, solver.grid), inner(v1, v1, solver.grid)
        lhs = (v1_sq - v0_sq) / (2 * dt) + dissipation
        terms = energy_terms(solver, cf, u_mid, current.p.data[0], t_mid)
        rhs = sum(terms[name] for name in TERM_NAMES)
        defect = lhs - rhs

        v_norm = math.sqrt(inner(v_mid, v_mid, solver.grid))
        f0, f1, f2 = measured_coefficients(terms, dissipation, defect, v_norm)
        row = LedgerRow(
            step=current.steps,
            t=t_mid,
            dt=dt,
            v_sq=inner(v_mid, v_mid, solver.grid),
            dissipation=dissipation,
            lhs=lhs,
            rhs=rhs,
            defect=defect,
            terms=terms,
            f0=f0,
            f1=f1,
            f2=f2,
        )
        row.bounds = bound_rows(row, self.cf, self.p, v_norm)
        self.ledger.rows.append(row)
        self.ledger.samples.append(self.sample(current.u.data, current.t))


def measured_coefficients(terms: dict, dissipation: float, defect: float, v_norm: float):
    """(f0, f1, f2) with d/dt ||v||^2 <= f0 ||v||^2 + f1 ||v|| + f2 at this step."""
    quadratic = sum(terms[name] for name in QUADRATIC_TERMS)
    linear = sum(terms[name] for name in TERM_NAMES if name not in QUADRATIC_TERMS and name != "diffusion_cross")
    f2 = 2 * max(0.0, terms["diffusion_cross"] - dissipation) + 2 * abs(defect)
    if v_norm == 0:
        return 0.0, 0.0, f2 + 2 * abs(quadratic) + 2 * abs(linear)
    return 2 * abs(quadratic) / v_norm**2, 2 * abs(linear) / v_norm, f2


def bound_rows(row: LedgerRow, cf: ClosedFormFields, p: ParamTriple, v_norm: float) -> dict:
    """Each term, or group of terms, against the shape of its bound."""
    flow, terms = cf.flow, row.terms
    W = flow.hs_norm(row.t)
    Fn = flow.forcing_norm(row.t)
    tn = p.theta * p.nu
    eps = p.epsilon
    s = cf.pair.scale
    slope = cf.pair.fmap.slope
    diss = row.dissipation
    quarter = tn**0.25
    corrector = sum(terms[name] for name in CORRECTOR_TERMS)
    diffusion_shape = eps * diss + (p.eta * (1 + math.sqrt(tn)) + p.nu * (1 + tn**-0.5)) * W**2 / eps
    rows = [
        BoundRow("layer_advection", abs(terms["layer_advection"]), quarter * W**2 * v_norm),
        BoundRow("velocity_gradient_stretch", abs(terms["velocity_gradient_stretch"]), W * v_norm**2),
        BoundRow(
            "layer_time_derivative",
            abs(terms["layer_time_derivative"] + terms["transport_skew"]),
            quarter * (W**2 + Fn) * v_norm,
        ),
        BoundRow("diffusion_cross", abs(terms["diffusion_cross"]), diffusion_shape),
        BoundRow("layer_stretch", abs(terms["layer_stretch"]), W * v_norm**2 + eps * diss + eps * p.nu * v_norm**2),
        BoundRow("corrector_terms", abs(corrector) / s if s > 0 else 0.0, (W**2 + Fn) * v_norm),
        BoundRow(
            "oscillation_terms",
            abs(terms["oscillation_advection"]) + abs(terms["pressure_gradient"]),
            slope * (Fn + W**2) * v_norm,
        ),
    ]
    return {r.name: r for r in rows}


@dataclass
class BoundSummary:
    name: str
    max_lhs: float
    max_ratio: float
    mean_ratio: float


def bound_ratio_report(ledger: EnergyLedger) -> list:
    """Per bound: the largest term, the largest and the mean finite ratio over the run."""
    if not ledger.rows:
        raise InsufficientDataError("the ledger has no steps")
    out = []
    for name in BOUND_NAMES:
        rows = [r.bounds[name] for r in ledger.rows]
        ratios = [b.ratio for b in rows if math.isfinite(b.ratio)]
        out.append(
            BoundSummary(
                name,
                max(b.lhs for b in rows),
                max(ratios, default=0.0),
                float(np.mean(ratios)) if ratios else 0.0,
            )
        )
    return out


def ratio_growth(reports: list, limit: float = 4.0) -> dict:
    """Bounds whose max ratio spreads by more than ``limit`` across runs ordered by refinement.

    ``reports`` is a list of bound_ratio_report outputs; returns name -> (spread, growing).
    """
    out = {}
    for name in BOUND_NAMES:
        ratios = [r.max_ratio for report in reports for r in report if r.name == name and r.max_ratio > 0]
        if len(ratios) < 2:
            continue
        spread = max(ratios) / min(ratios)
        out[name] = (spread, spread > limit and ratios[-1] == max(ratios))
    return out


# Bound shapes of the inequality coefficients


def coefficient_shapes(ledger: EnergyLedger, cf: ClosedFormFields, forcing=None) -> dict:
    """Shape series of f0, f1, f2 at the ledger's step midpoints."""
    p = ledger.params
    tn = p.theta * p.nu
    flow = cf.flow
    times = [r.t for r in ledger.rows]
    W = np.array([flow.hs_norm(t) for t in times])
    Fn = np.array([flow.forcing_norm(t) for t in times])
    mismatch = np.zeros(len(times))
    if forcing is not None and hasattr(forcing, "perturbation"):
        mismatch[:] = math.sqrt(inner(forcing.perturbation, forcing.perturbation, cf.grid))
    return {
        "f0": W + p.nu,
        "f1": (tn**0.25 + cf.pair.scale) * (W**2 + Fn) + mismatch,
        "f2": (p.eta + math.sqrt(p.nu / p.eta) * p.w0_sup_norm) * W**2,
    }


def fitted_constants(ledger: EnergyLedger, shapes: dict) -> dict:
    """C for each coefficient: the smallest constant with raw <= C * shape at every step."""
    out = {}
    for name, shape in shapes.items():
        raw = ledger.series(name)
        positive = shape > 0
        out[name] = float(np.max(raw[positive] / shape[positive])) if np.any(positive) else 0.0
    return out


@dataclass
class Envelope:
    times: np.ndarray
    y: np.ndarray
    m: float
    gamma: float

    @property
    def bound(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.y, 0.0))


def _rk4(rate, t0, y0, t1, substeps):
    h = (t1 - t0) / substeps
    t, y = t0, y0
    for _ in range(substeps):
        k1 = rate(t, y)
        k2 = rate(t + h / 2, y + h / 2 * k1)
        k3 = rate(t + h / 2, y + h / 2 * k2)
        k4 = rate(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return y


def gronwall_envelope(times, f0, f1, f2, f_init: float, gamma: float, rtol: float = 1e-10, max_halvings: int = 12) -> Envelope:
    """Solve y' = f0 y + f1 sqrt(y) + f2, y(0) = f_init^2, with f's piecewise linear in time.

    Each sample interval is integrated by RK4, halving the substep until two
    successive results agree to ``rtol``. M = sup sqrt(y) / gamma.
    """
    times = np.asarray(times, float)
    f0, f1, f2 = (np.asarray(f, float) for f in (f0, f1, f2))
    if not (times.shape == f0.shape == f1.shape == f2.shape) or times.size < 2:
        raise InsufficientDataError("the envelope needs matching series of at least 2 samples")
    if np.any(f0 < 0) or np.any(f1 < 0) or np.any(f2 < 0) or f_init < 0:
        raise DomainError("Gronwall coefficients and the initial value must be nonnegative")
    if gamma <= 0:
        raise DomainError("gamma must be positive")

    def rate(t, y):
        c0, c1, c2 = (np.interp(t, times, f) for f in (f0, f1, f2))
        return c0 * y + c1 * math.sqrt(max(y, 0.0)) + c2

    y = np.empty_like(times)
    y[0] = f_init**2
    for k in range(times.size - 1):
        substeps = 1
        coarse = _rk4(rate, times[k], y[k], times[k + 1], substeps)
        for _ in range(max_halvings):
            substeps *= 2
            fine = _rk4(rate, times[k], y[k], times[k + 1], substeps)
            if abs(fine - coarse) <= rtol * max(abs(fine), 1e-300):
                break
            coarse = fine
        y[k + 1] = fine
    m = float(np.max(np.sqrt(np.maximum(y, 0.0)))) / gamma
    return Envelope(times, y, m, gamma)


@dataclass
class ConvergenceRecord:
    eta: float
    nu: float
    delta: float
    alpha: float
    beta: float
    budget: float
    theta_nu: float
    steps: int
    dt: float
    sup_error: float  # sup_t ||u - w0||
    m: float  # sup_error / budget
    gradient_metric: float  # eta ||D' u||_{L2L2} + nu ||D3 u||_{L2L2}
    gradient_ratio: float
    v_gradient_integral: float  # int int eta |D' v|^2 + nu |D3 v|^2
    v_gradient_ratio: float  # over budget^2
    envelope_m: float
    envelope_violation: float
    max_defect: float
    layer_sup: float  # sup_t ||layer||
    layer_ratio: float  # over (theta nu)^(1/4) sup ||w0||_{H^s}
    initial_error: float  # ||U - W0||
    initial_corrector: float  # delta^(alpha-5/2) ||w~(0)||
    initial_layer: float  # ||layer(0)||
    w_gradient_ratio: float  # int int (eta|D'w|^2 + nu|D3 w|^2) / ((eta + nu) T)
    layer_gradient_ratio: float  # same for the layer over (eta + sqrt(nu/eta)) T
    physical_dissipation: float
    energy_constant: float
    c_star: float
    epsilon_ok: bool
    theta_condition: bool
    f0_constant: float
    f1_constant: float
    f2_constant: float

    @classmethod
    def columns(cls) -> list:
        return [f.name for f in fields(cls)]

    def validate(self):
        for name, value in asdict(self).items():
            if isinstance(value, float) and not (math.isfinite(value) and value >= 0):
                raise CheckFailure(f"convergence record entry {name} = {value} is not finite and nonnegative", witness={name: value})
        return self


def _trapezoid(values, times) -> float:
    if len(times) < 2:
        return 0.0
    return float(scipy.integrate.trapezoid(values, times))


def convergence_metrics(ledger: EnergyLedger, trajectory, cf: ClosedFormFields, initial_error: float, forcing=None) -> ConvergenceRecord:
    """Summarize a complete run against the budget beta + delta^(alpha - 5/2)."""
    if len(ledger.samples) < 2 or not ledger.rows:
        raise InsufficientDataError("convergence metrics need a trajectory of at least one step")
    p = ledger.params
    grid = cf.grid
    times = ledger.times
    t_final = float(times[-1])
    budget = p.budget
    tn = p.theta * p.nu

    sup_error = float(np.max(ledger.series("error_l2")))
    u_tangential = math.sqrt(_trapezoid(ledger.series("u_tangential_sq"), times))
    u_normal = math.sqrt(_trapezoid(ledger.series("u_normal_sq"), times))
    gradient_metric = p.eta * u_tangential + p.nu * u_normal
    v_gradient = _trapezoid(ledger.series("v_gradient_sq"), times)

    shapes = coefficient_shapes(ledger, cf, forcing)
    constants = fitted_constants(ledger, shapes)
    row_times = np.concatenate([[times[0]], [r.t for r in ledger.rows], [times[-1]]])

    def padded(name):
        s = ledger.series(name)
        return np.concatenate([[s[0]], s, [s[-1]]])

    f_init = ledger.samples[0].v_l2
    envelope = gronwall_envelope(row_times, padded("f0"), padded("f1"), padded("f2"), f_init, budget)
    bound_at_samples = np.interp(times, envelope.times, envelope.bound)
    violation = float(np.max(np.maximum(ledger.series("v_l2") - bound_at_samples - ledger.max_defect, 0.0)))

    w0_sup = max(cf.flow.hs_norm(t) for t in times)
    layer_sup = float(np.max(ledger.series("layer_l2")))
    tilde0 = cf.at("tilde", 0.0)
    layer0 = cf.at("layer", 0.0)

    summaries = {b.name: b for b in bound_ratio_report(ledger)}
    c_star = max(summaries["diffusion_cross"].max_ratio, summaries["layer_stretch"].max_ratio)
    return ConvergenceRecord(
        eta=p.eta,
        nu=p.nu,
        delta=p.delta,
        alpha=p.alpha,
        beta=p.beta_value,
        budget=budget,
        theta_nu=tn,
        steps=len(ledger.rows),
        dt=float(ledger.rows[0].dt),
        sup_error=sup_error,
        m=sup_error / budget,
        gradient_metric=gradient_metric,
        gradient_ratio=gradient_metric / budget,
        v_gradient_integral=v_gradient,
        v_gradient_ratio=v_gradient / budget**2,
        envelope_m=envelope.m,
        envelope_violation=violation,
        max_defect=ledger.max_defect,
        layer_sup=layer_sup,
        layer_ratio=layer_sup / (tn**0.25 * w0_sup),
        initial_error=initial_error,
        initial_corrector=cf.pair.scale * math.sqrt(inner(tilde0, tilde0, grid)),
        initial_layer=math.sqrt(inner(layer0, layer0, grid)),
        w_gradient_ratio=_trapezoid(ledger.series("w_gradient_sq"), times) / ((p.eta + p.nu) * t_final),
        layer_gradient_ratio=_trapezoid(ledger.series("layer_gradient_sq"), times) / ((p.eta + math.sqrt(p.nu / p.eta)) * t_final),
        physical_dissipation=_trapezoid(ledger.series("physical_dissipation"), times),
        energy_constant=trajectory.energy_constant,
        c_star=c_star,
        epsilon_ok=c_star == 0 or p.epsilon <= 1 / (2 * c_star),
        theta_condition=theta_condition_holds(p, w0_sup),
        f0_constant=constants["f0"],
        f1_constant=constants["f1"],
        f2_constant=constants["f2"],
    ).validate()


# CSV output: header row, '.' decimal, floats written exactly


def format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def ledger_columns() -> list:
    bounds = [f"{name}_ratio" for name in BOUND_NAMES]
    return ["step", "t", "dt", "v_sq", "dissipation", "lhs", "rhs", "defect", *TERM_NAMES, "pressure_gradient_slopes", "f0", "f1", "f2", *bounds]


def write_ledger_csv(ledger: EnergyLedger, path):
    with open(path, "w", newline="") as out:
        writer = csv.writer(out)
        writer.writerow(ledger_columns())
        for r in ledger.rows:
            writer.writerow(
                [format_cell(x) for x in (r.step, r.t, r.dt, r.v_sq, r.dissipation, r.lhs, r.rhs, r.defect)]
                + [format_cell(r.terms[name]) for name in TERM_NAMES]
                + [format_cell(r.terms["pressure_gradient_slopes"])]
                + [format_cell(x) for x in (r.f0, r.f1, r.f2)]
                + [format_cell(r.bounds[name].ratio) for name in BOUND_NAMES]
            )
    return path


def write_record_csv(records: list, path, extra: Optional[dict] = None):
    """One row per ConvergenceRecord; ``extra`` adds constant leading columns (run name etc)."""
    extra = extra or {}
    with open(path, "w", newline="") as out:
        writer = csv.writer(out)
        writer.writerow(list(extra) + ConvergenceRecord.columns())
        for rec in records:
            writer.writerow([format_cell(v) for v in extra.values()] + [format_cell(getattr(rec, c)) for c in ConvergenceRecord.columns()])
    return path


def _parse(kind, text):
    if kind is bool:
        if text not in ("true", "false"):
            raise ValueError(f"not a boolean: {text!r}")
        return text == "true"
    return kind(text)


def read_record_csv(path) -> list:
    """[(extra columns dict, ConvergenceRecord)]; raises ValueError or KeyError on malformed files."""
    kinds = {f.name: f.type for f in fields(ConvergenceRecord)}
    casts = {"float": float, "int": int, "bool": bool, float: float, int: int, bool: bool}
    out = []
    with open(path, newline="") as src:
        for line in csv.DictReader(src):
            values = {name: _parse(casts[kinds[name]], line[name]) for name in kinds}
            extra = {k: v for k, v in line.items() if k not in kinds}
            out.append((extra, ConvergenceRecord(**values)))
    return out
