"""One run: solve, audit, write the run directory."""
import hashlib
import inspect
import json
import time
from dataclasses import asdict
from datetime import datetime
from pathlib import Path

from lamina import console
from lamina.audit import (
    ClosedFormFields,
    EnergyAudit,
    convergence_metrics,
    bound_ratio_report,
    write_ledger_csv,
    write_record_csv,
)
from lamina.config import RunConfig
from lamina.errors import SolverError, StepRejected, ValidationError
from lamina.experiment import Experiment, build_experiment
from lamina.namesgenerator import get_random_name
from lamina.snapshots import snapshot_name, write_field
from lamina.solver import solve, start_run

MAX_RETRIES = 3


def run_nickname(config: RunConfig) -> str:
    """Stable per config, wherever the output goes: reruns land in the same directory.

    The hex suffix keeps distinct configs apart; the word pair alone has few values.
    """
    data = config.to_dict()
    del data["output"]
    digest = hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()
    return f"{get_random_name(int(digest[:16], 16))}_{digest[16:24]}"


class RunDirectory:
    """<out>/<nickname>/ with its summary, info and the shared manifest."""

    def __init__(self, out, nickname: str):
        self.out = Path(out)
        self.nickname = nickname
        self.savedir = self.out / nickname
        self.savedir.mkdir(parents=True, exist_ok=True)
        (self.savedir / "snapshots").mkdir(exist_ok=True)

    @property
    def info_path(self) -> Path:
        return self.savedir / f"{self.nickname}-info.json"

    def writesummary(self, summary: str):
        with open(self.savedir / f"{self.nickname}-summary.txt", "a") as f:
            f.write("\n\n")
            f.write(summary)

    def writeinfo(self, **kw):
        data = json.loads(self.info_path.read_text()) if self.info_path.is_file() else {}
        data.update(kw)
        self.info_path.write_text(json.dumps(data, indent=4, sort_keys=True))

    def writemanifest(self, message: str):
        with open(self.out / "manifest.txt", "a") as f:
            f.write(f"{datetime.now().isoformat()} {self.nickname} {message}\n")


class SnapshotWriter:
    def __init__(self, directory: Path, every: int):
        self.directory = directory
        self.every = max(1, every)

    def write(self, state):
        write_field(self.directory / snapshot_name(state.steps, "u"), state.u, note=f"velocity, step {state.steps}")
        write_field(self.directory / snapshot_name(state.steps, "p"), state.p, note=f"pressure, step {state.steps}")

    def __call__(self, previous, current):
        if current.steps % self.every == 0:
            self.write(current)


def derived_parameters(exp: Experiment) -> dict:
    p = exp.params
    return {
        "theta": p.theta,
        "theta_nu": p.theta * p.nu,
        "layer_width": p.layer_width,
        "beta": p.beta_value,
        "oscillation_rate": p.oscillation_rate,
        "budget": p.budget,
        "w0_sup_norm": p.w0_sup_norm,
        "slope": exp.fmap.slope,
    }


def _solve_with_retries(exp: Experiment, run: RunDirectory, dt: float):
    for attempt in range(MAX_RETRIES + 1):
        solver, state, initial = start_run(exp, dt)
        cf = ClosedFormFields(exp.grid, exp.flow, exp.pair, exp.layer)
        audit = EnergyAudit(solver, cf, exp.params)
        audit.start(state)
        snapshots = SnapshotWriter(run.savedir / "snapshots", exp.config.time.snapshot_every)
        snapshots.write(state)
        try:
            trajectory = solve(solver, state, exp.config.time.t_final, observers=(audit, snapshots))
            return solver, trajectory, audit, cf, initial
        except StepRejected as e:
            if attempt == MAX_RETRIES:
                raise
            console.warn(f"{e}; retrying with dt = {e.suggested_dt:.4g}")
            run.writesummary(f"{datetime.now().isoformat()}\nStep rejected: {e}. Restarting with dt = {e.suggested_dt!r}")
            dt = e.suggested_dt


def cmd_run(config: RunConfig) -> int:
    """Solve one admissible triple and audit it. SolverError propagates (exit code 2)."""
    exp = build_experiment(config)
    if not exp.verdict:
        raise ValidationError(f"inadmissible triple: {exp.verdict.reason}")

    run = RunDirectory(config.output, run_nickname(config))
    grid = exp.grid
    console.done(f"Started run {run.nickname}")
    run.writemanifest("started")
    run.writeinfo(
        config=config.to_dict(),
        derived=derived_parameters(exp),
        grid={"n1": grid.n1, "n2": grid.n2, "n3": grid.n3, "height": grid.height, "h3_min": grid.h3},
        dt=config.time.dt,
        seed=config.seed,
        status="running",
    )
    run.writesummary(
        inspect.cleandoc(
            f"""
            {datetime.now().isoformat()}
            Created run with parameters:

            - eta, nu, delta: {exp.params.eta!r}, {exp.params.nu!r}, {exp.params.delta!r}
            - alpha: {exp.params.alpha!r}
            - beta + delta^(alpha-5/2): {exp.params.budget!r}
            - layer width: {exp.params.layer_width!r}
            - grid: {grid.n1} x {grid.n2} x {grid.n3}, height {grid.height}
            - dt: {config.time.dt!r}, t_final: {config.time.t_final!r}
            """
        )
    )

    start = time.time()
    try:
        solver, trajectory, audit, cf, initial = _solve_with_retries(exp, run, config.time.dt)
    except SolverError as e:
        last = e.last_state
        if last is not None:
            SnapshotWriter(run.savedir / "snapshots", 1).write(last)
        run.writeinfo(status="failed", error=str(e), last_step=None if last is None else last.steps, last_time=None if last is None else last.t)
        run.writesummary(f"{datetime.now().isoformat()}\nRun failed: {e}")
        run.writemanifest("failed")
        raise

    for line in initial.lines():
        console.info(line)
    record = convergence_metrics(audit.ledger, trajectory, cf, initial.initial_error_l2, forcing=solver.forcing)
    bounds = bound_ratio_report(audit.ledger)
    write_ledger_csv(audit.ledger, run.savedir / "ledger.csv")
    write_record_csv([record], run.savedir / "record.csv", extra={"nickname": run.nickname})

    elapsed = time.time() - start
    run.writeinfo(
        status="finished",
        steps=trajectory.steps,
        dt_effective=trajectory.final.dt,
        elapsed_seconds=round(elapsed, 3),
        record=asdict(record),
        bounds={b.name: {"max_ratio": b.max_ratio, "mean_ratio": b.mean_ratio} for b in bounds},
    )
    bound_lines = "\n".join(f"- {b.name}: max ratio {b.max_ratio:.4g}, mean {b.mean_ratio:.4g}" for b in bounds)
    run.writesummary(
        f"{datetime.now().isoformat()}\nRun complete in {elapsed:.1f} s, {trajectory.steps} steps\n"
        + "\n".join(initial.lines())
        + f"\nsup ||u - w0|| = {record.sup_error:.6e}, M = {record.m:.4g}, envelope M = {record.envelope_m:.4g}"
        + f"\nmax identity defect = {record.max_defect:.3e}\n"
        + bound_lines
    )
    run.writemanifest("finished")
    console.summary(f"{run.nickname}: M = {record.m:.4g}, sup error {record.sup_error:.4e}, budget {record.budget:.4e}")
    console.done(f"Finished run {run.nickname} in {elapsed:.1f} s")
    return 0
