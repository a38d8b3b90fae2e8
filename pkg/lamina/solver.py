"""Time integration of the flattened Navier-Stokes system.

    d_t u + [(B u) . grad] u - div(A grad u) + B^T grad p = F,   div(B u) = 0,

u = 0 on y3 = 0 and on the lid y3 = H, A = B A0 B^T. Each step is
Crank-Nicolson in the diffusion (A frozen at the half step), second-order
Adams-Bashforth in the skew-symmetric advection, then an incremental
pressure projection that restores div(B u) = 0 at interior nodes.
"""
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.integrate
import scipy.linalg

from lamina.constants import CG_TOLERANCE
from lamina.errors import SolverError, StepRejected, ValidationError
from lamina.fields import Field, Grid, grad, inner, weak_divergence
from lamina.flow import ReferenceFlow
from lamina.geometry import FlatteningMap
from lamina.krylov import pcg
from lamina.params import ParamTriple
from lamina.profiles import ProfilePair
from lamina.projection import Projector, WallSlopes, interior_mask
from lamina.viscosity import ViscositySpec, transformed_matrix


@dataclass
class SolverState:
    u: Field
    p: Field
    t: float
    dt: float
    steps: int = 0
    # Skew advection of the previous step, for Adams-Bashforth
    advection: Optional[np.ndarray] = field(default=None, repr=False)
    iterations: dict = field(default_factory=dict)


class ForcingField:
    """F(t) = F0(t) + perturbation on the grid, from precomputed spatial parts."""

    def __init__(self, flow: ReferenceFlow, grid: Grid, perturbation: Optional[np.ndarray] = None):
        self.flow = flow
        y = grid.coords()
        self._velocity = flow.shape.velocity(*y)
        self._advection = flow.shape.advection(*y)
        self._pressure = flow.pressure_gradient(0.0, *y)
        self.perturbation = np.zeros((3,) + grid.shape) if perturbation is None else perturbation

    def reference(self, t: float) -> np.ndarray:
        """F0(t)"""
        tau, dtau = float(self.flow.temporal(t)), float(self.flow.temporal_dt(t))
        return dtau * self._velocity + tau**2 * self._advection + self._pressure

    def __call__(self, t: float) -> np.ndarray:
        return self.reference(t) + self.perturbation


class DiffusionPreconditioner:
    """Exact inverse of I - dt/2 (eta D'^2 + nu D3^2) with zero wall values."""

    def __init__(self, grid: Grid, eta: float, nu: float, dt: float):
        self.grid = grid
        w = grid.weights3
        d3 = grid.d3.toarray()
        stiffness = (d3.T @ (w[:, None] * d3))[1:-1, 1:-1]
        lam, vecs = scipy.linalg.eigh(stiffness, np.diag(w[1:-1]))
        self._vecs = vecs
        self._wvecs = w[1:-1, None] * vecs
        kk = grid.k1[:, None] ** 2 + grid.kr2[None, :] ** 2
        self._inverse = 1.0 / (1.0 + 0.5 * dt * (eta * kk[:, :, None] + nu * lam[None, None, :]))

    def __call__(self, r: np.ndarray) -> np.ndarray:
        n1, n2 = self.grid.n1, self.grid.n2
        hat = np.fft.rfftn(r[..., 1:-1], axes=(-3, -2))
        coeff = (hat @ self._wvecs) * self._inverse
        out = np.zeros_like(r)
        out[..., 1:-1] = np.fft.irfftn(coeff @ self._vecs.T, s=(n1, n2), axes=(-3, -2))
        return out


class NavierStokesSolver:
    def __init__(
        self,
        grid: Grid,
        fmap: FlatteningMap,
        viscosity: ViscositySpec,
        forcing: Callable,
        cfl: float = 0.5,
        tol: float = CG_TOLERANCE,
    ):
        self.grid = grid
        self.fmap = fmap
        self.viscosity = viscosity
        self.forcing = forcing
        self.cfl = cfl
        self.tol = tol
        self.slopes = WallSlopes.from_map(fmap, grid)
        self.projector = Projector(grid, self.slopes, no_slip=True, tol=tol)
        self.mask = interior_mask(grid)
        self._coords = grid.coords()
        self._matrices = {}
        self._preconditioners = {}
        z = grid.z
        gaps = np.diff(z)
        self._dz = np.minimum(np.concatenate([[gaps[0]], gaps]), np.concatenate([gaps, [gaps[-1]]]))

    def matrix(self, t: float) -> np.ndarray:
        """A at the grid nodes, cached per sign epoch of A0."""
        spec = self.viscosity
        key = 0 if spec.is_diagonal else math.floor(t / spec.flip_interval)
        if key not in self._matrices:
            if len(self._matrices) > 2:
                self._matrices.clear()
            self._matrices[key] = transformed_matrix(spec, self.fmap, t, *self._coords)
        return self._matrices[key]

    def inner(self, a, b) -> float:
        return inner(a, b, self.grid)

    def _flux(self, ui, A):
        return np.einsum("jk...,k...->j...", A, grad(ui, self.grid))

    def diffusion(self, u: np.ndarray, A: np.ndarray) -> np.ndarray:
        """div(A grad u_i) per component, zero at the walls."""
        out = np.stack([weak_divergence(self._flux(u[i], A), self.grid) for i in range(3)])
        return out * self.mask

    def dissipation(self, u: np.ndarray, A: np.ndarray) -> float:
        """sum_i <A grad u_i, grad u_i> = <A0 B^T grad u, B^T grad u>"""
        return sum(self.inner(self._flux(u[i], A), grad(u[i], self.grid)) for i in range(3))

    def advection(self, u: np.ndarray) -> np.ndarray:
        """1/2 [ (Bu . grad) u + div(Bu (x) u) ], skew in the grid inner product."""
        bu = self.slopes.apply(u)
        out = np.empty_like(u)
        for i in range(3):
            transport = np.sum(bu * grad(u[i], self.grid), axis=0)
            out[i] = 0.5 * (transport + weak_divergence(bu * u[i], self.grid))
        return out * self.mask

    def cfl_number(self, u: np.ndarray, dt: float) -> float:
        bu = np.abs(self.slopes.apply(u))
        rate = bu[0] / self.grid.h1 + bu[1] / self.grid.h2 + bu[2] / self._dz
        return dt * float(np.max(rate))

    def _preconditioner(self, dt):
        if dt not in self._preconditioners:
            self._preconditioners[dt] = DiffusionPreconditioner(self.grid, self.viscosity.eta, self.viscosity.nu, dt)
        return self._preconditioners[dt]

    def step(self, state: SolverState) -> SolverState:
        u, dt, t = state.u.data, state.dt, state.t
        courant = self.cfl_number(u, dt)
        if courant > self.cfl:
            raise StepRejected(
                f"CFL number {courant:.3g} exceeds {self.cfl} at t = {t:.6g}",
                suggested_dt=0.9 * dt * self.cfl / courant,
            )

        A = self.matrix(t + dt / 2)
        nonlinear = self.advection(u)
        # Euler on the first step, Adams-Bashforth after
        extrapolated = nonlinear if state.advection is None else 1.5 * nonlinear - 0.5 * state.advection
        p_old = state.p.data[0]
        rhs = u + 0.5 * dt * self.diffusion(u, A)
        rhs = rhs + dt * (self.forcing(t + dt / 2) - extrapolated - self.projector.correction(p_old))
        rhs = rhs * self.mask

        def implicit(v):
            return v - 0.5 * dt * self.diffusion(v, A)

        star, info = pcg(implicit, rhs, self._preconditioner(dt), self.inner, x0=u, tol=self.tol)
        new_u, phi = self.projector.project(star)
        new_p = p_old + phi / dt
        if not (np.all(np.isfinite(new_u)) and np.all(np.isfinite(new_p))):
            raise SolverError(f"non-finite velocity after step {state.steps + 1} at t = {t + dt:.6g}", last_state=state)

        return SolverState(
            u=state.u.with_data(new_u, time=t + dt),
            p=state.p.with_data(new_p[None], time=t + dt),
            t=t + dt,
            dt=dt,
            steps=state.steps + 1,
            advection=nonlinear,
            iterations={"diffusion": info.iterations, "projection": self.projector.last_info.iterations},
        )

    def skewness(self, u: np.ndarray) -> float:
        """<N(u), u>, zero up to rounding."""
        return self.inner(self.advection(u), u)

    def pressure_work(self, u: np.ndarray, p: np.ndarray) -> float:
        """<B^T grad p, u> for walls-zero u; vanishes when div(B u) = 0."""
        return self.inner(self.projector.correction(p), u)


@dataclass
class InitialReport:
    lift_l2: float
    perturbation_l2: float
    initial_error_l2: float
    budget: float

    def lines(self) -> list:
        return [
            f"||lift||         = {self.lift_l2:.6e}",
            f"||perturbation|| = {self.perturbation_l2:.6e}",
            f"||U - W0||       = {self.initial_error_l2:.6e}  (budget beta + delta^(alpha-5/2) = {self.budget:.6e})",
        ]


def smooth_bump(grid: Grid, seed: int = 0) -> np.ndarray:
    """Unit-L2 field vanishing at y3 = 0, random phases from the seed."""
    rng = np.random.default_rng(seed)
    y1, y2, y3 = grid.coords()
    a, b, c = rng.uniform(0, 2 * np.pi, 3)
    envelope = y3**2 * np.exp(-y3)
    bump = np.stack(np.broadcast_arrays(np.cos(y2 + a) * envelope, np.cos(y1 + b) * envelope, np.cos(y1 + y2 + c) * envelope))
    bump = bump * interior_mask(grid)
    return bump / math.sqrt(inner(bump, bump, grid))


def wall_lift(flow: ReferenceFlow, profiles: ProfilePair, width: float, grid: Grid) -> np.ndarray:
    """-W0(y', 0) phi(y3/a) + a e3 psi(y3/a) div' W0(y', 0): cancels W0 on the wall."""
    y1, y2, y3 = grid.coords()
    zero = np.zeros_like(y1 * y2)
    wall = flow.initial(y1, y2, zero)
    grad_wall = flow.velocity_gradient(0.0, y1, y2, zero)
    z = y3 / width
    lift = -wall * profiles.phi(z)
    lift[2] = lift[2] + width * profiles.psi(z) * (grad_wall[0, 0] + grad_wall[1, 1])
    return np.array(np.broadcast_to(lift, (3,) + grid.shape))


def init_state(
    solver: NavierStokesSolver,
    flow: ReferenceFlow,
    p: ParamTriple,
    profiles: ProfilePair,
    dt: float,
    perturbation: float = 0.0,
    seed: int = 0,
):
    """Initial velocity U: W0 plus a wall lift plus perturbation * bump, projected. Returns (state, InitialReport)."""
    budget = p.budget
    if perturbation < 0 or perturbation > budget:
        raise ValidationError(f"initial perturbation {perturbation} must lie in [0, beta + delta^(alpha-5/2)] = [0, {budget:.6g}]")
    grid = solver.grid
    w0 = np.array(np.broadcast_to(flow.initial(*grid.coords()), (3,) + grid.shape))
    lift = wall_lift(flow, profiles, p.layer_width, grid)
    bump = perturbation * smooth_bump(grid, seed) if perturbation > 0 else np.zeros_like(w0)
    u = (w0 + lift + bump) * solver.mask
    u, _ = solver.projector.project(u)

    diff = u - w0
    report = InitialReport(
        lift_l2=math.sqrt(inner(lift, lift, grid)),
        perturbation_l2=math.sqrt(inner(bump, bump, grid)),
        initial_error_l2=math.sqrt(inner(diff, diff, grid)),
        budget=budget,
    )
    if report.initial_error_l2 > budget:
        raise ValidationError(
            f"||U - W0|| = {report.initial_error_l2:.6g} exceeds the budget {budget:.6g}; refine the grid or lower the perturbation"
        )
    state = SolverState(
        u=Field(grid, u, 0.0),
        p=Field(grid, np.zeros((1,) + grid.shape), 0.0),
        t=0.0,
        dt=dt,
    )
    return state, report


@dataclass
class Trajectory:
    initial: SolverState
    final: SolverState
    times: list
    kinetic: list
    gradient_sq: list
    forcing_sq: list
    steps: int

    @property
    def energy_constant(self) -> float:
        """(sup_t ||u||^2 + int ||grad u||^2) / (int ||F||^2 + ||U||^2)"""
        if len(self.times) > 1:
            dissipated = float(scipy.integrate.trapezoid(self.gradient_sq, self.times))
            supplied = float(scipy.integrate.trapezoid(self.forcing_sq, self.times))
        else:
            dissipated = supplied = 0.0
        lhs, rhs = max(self.kinetic) + dissipated, supplied + self.kinetic[0]
        return lhs / rhs if rhs > 0 else 0.0


def _grad_sq(solver, u):
    g = grad(u, solver.grid)
    return inner(g, g, solver.grid)


def solve(solver: NavierStokesSolver, state: SolverState, t_final: float, observers=()) -> Trajectory:
    """Integrate to t_final with a fixed step, calling observer(previous, current) after each step."""
    if t_final <= 0:
        raise ValidationError("t_final must be positive")
    steps = max(1, math.ceil(t_final / state.dt - 1e-9))
    state = replace(state, dt=t_final / steps)
    initial = state
    u0 = state.u.data
    times, kinetic = [0.0], [solver.inner(u0, u0)]
    gradient_sq = [_grad_sq(solver, u0)]
    f0 = solver.forcing(0.0)
    forcing_sq = [solver.inner(f0, f0)]

    for _ in range(steps):
        new = solver.step(state)
        for observe in observers:
            observe(state, new)
        state = new
        u = state.u.data
        f = solver.forcing(state.t)
        times.append(state.t)
        kinetic.append(solver.inner(u, u))
        gradient_sq.append(_grad_sq(solver, u))
        forcing_sq.append(solver.inner(f, f))

    return Trajectory(initial, state, times, kinetic, gradient_sq, forcing_sq, steps)


@dataclass
class SelfConvergence:
    dts: list
    differences: list

    @property
    def ratio(self) -> float:
        """||u_dt - u_dt/2|| / ||u_dt/2 - u_dt/4||, 4 for a second-order scheme."""
        return self.differences[0] / self.differences[1] if self.differences[1] > 0 else math.inf


def self_convergence(experiment, dt: float, t_final: Optional[float] = None) -> SelfConvergence:
    """Runs dt, dt/2 and dt/4 from the same initial data and compares the end states."""
    t_final = experiment.config.time.t_final if t_final is None else t_final
    finals = []
    dts = [dt, dt / 2, dt / 4]
    for step in dts:
        solver, state, _ = start_run(experiment, step)
        finals.append(solve(solver, state, t_final).final.u.data)
    diffs = [math.sqrt(inner(a - b, a - b, experiment.grid)) for a, b in zip(finals, finals[1:])]
    return SelfConvergence(dts, diffs)


def start_run(experiment, dt: Optional[float] = None):
    """(solver, initial state, InitialReport) for an Experiment."""
    config = experiment.config
    dt = config.time.dt if dt is None else dt
    grid = experiment.grid
    perturbation = None
    if config.flow.forcing_perturbation:
        perturbation = config.flow.forcing_perturbation * smooth_bump(grid, config.seed + 1) / config.time.t_final
    forcing = ForcingField(experiment.flow, grid, perturbation)
    solver = NavierStokesSolver(grid, experiment.fmap, experiment.viscosity, forcing, cfl=config.time.cfl)
    state, report = init_state(
        solver,
        experiment.flow,
        experiment.params,
        experiment.profiles,
        dt,
        perturbation=config.flow.initial_perturbation,
        seed=config.seed,
    )
    return solver, state, report
