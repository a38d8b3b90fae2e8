"""Run a grid of (eta, nu, delta) triples in parallel and aggregate their records.

Each admissible point becomes one ``runlamina.py run`` subprocess with its own
config file and log; at most ``jobs`` run at a time.
"""
import asyncio
import csv
import itertools
import json
import math
import os
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from lamina import console
from lamina.audit import BOUND_NAMES, BoundSummary, ConvergenceRecord, format_cell, ratio_growth, read_record_csv
from lamina.config import RunConfig
from lamina.errors import ConfigurationError, InsufficientDataError, ValidationError
from lamina.experiment import build_experiment
from lamina.run import run_nickname

RUNNER = Path(__file__).resolve().parent.parent / "runlamina.py"
M_SPREAD_LIMIT = 4.0
MIN_ADMISSIBLE = 4


@dataclass
class SweepPoint:
    index: int
    eta: float
    nu: float
    delta: float
    config: RunConfig
    admissible: bool = True
    reason: str = ""
    returncode: Optional[int] = None

    @property
    def nickname(self) -> str:
        return run_nickname(self.config)


def _values(grid, fallback, count):
    return grid.values() if grid is not None else [fallback] * count


def sweep_triples(config: RunConfig) -> list:
    """(eta, nu, delta) in sweep order."""
    s = config.sweep
    etas = _values(s.eta, config.viscosity.eta, 1)
    if s.nu is not None and s.nu_power is not None:
        raise ConfigurationError("sweep.nu and sweep.nu_power are exclusive")
    if s.delta is not None and s.delta_match_eta:
        raise ConfigurationError("sweep.delta and sweep.delta_match_eta are exclusive")

    if s.mode == "paired":
        count = max(len(etas), len(s.nu.values()) if s.nu else 1, len(s.delta.values()) if s.delta else 1)
        if len(etas) == 1:
            etas = etas * count
        nus = [e**s.nu_power for e in etas] if s.nu_power is not None else _values(s.nu, config.viscosity.nu, count)
        deltas = list(etas) if s.delta_match_eta else _values(s.delta, config.geometry.delta, count)
        if not (len(etas) == len(nus) == len(deltas)):
            raise ConfigurationError("paired sweep grids must have the same count")
        return list(zip(etas, nus, deltas))
    if s.mode == "product":
        triples = []
        for eta in etas:
            nus = [eta**s.nu_power] if s.nu_power is not None else _values(s.nu, config.viscosity.nu, 1)
            deltas = [eta] if s.delta_match_eta else _values(s.delta, config.geometry.delta, 1)
            triples.extend((eta, nu, delta) for nu, delta in itertools.product(nus, deltas))
        return triples
    raise ConfigurationError(f"sweep.mode must be 'paired' or 'product', got '{s.mode}'")


def point_config(config: RunConfig, index: int, eta: float, nu: float, delta: float) -> RunConfig:
    return replace(
        config,
        viscosity=replace(config.viscosity, eta=eta, nu=nu),
        geometry=replace(config.geometry, delta=delta),
        seed=config.seed + index,
    )


def build_points(config: RunConfig) -> list:
    points = []
    for index, (eta, nu, delta) in enumerate(sweep_triples(config)):
        point = SweepPoint(index, eta, nu, delta, point_config(config, index, eta, nu, delta))
        try:
            verdict = build_experiment(point.config).verdict
            point.admissible, point.reason = bool(verdict), verdict.reason
        except ValidationError as e:
            point.admissible, point.reason = False, str(e)
        points.append(point)
    seen = {}
    for point in points:
        if point.nickname in seen:
            raise ConfigurationError(f"sweep points {seen[point.nickname]} and {point.index} share the run directory {point.nickname}")
        seen[point.nickname] = point.index
    return points


async def run_command(cmd: list, fname: Path, semaphore: asyncio.Semaphore) -> int:
    """Run one command with its output appended to fname."""
    async with semaphore:
        # Environment overrides are already baked into the point config
        env = {k: v for k, v in os.environ.items() if not k.startswith("LAMINA")}
        with open(fname, "a") as f:
            process = await asyncio.create_subprocess_exec(*cmd, stdout=f, stderr=f, env=env)
            console.done(f"Started: {' '.join(cmd[-3:])}, pid={process.pid}")
            await process.wait()
        if process.returncode == 0:
            console.done(f"Done: pid={process.pid}")
        else:
            console.fail(f"Failed: pid={process.pid}, exit {process.returncode}, log {fname}")
        return process.returncode


async def _run_all(commands: list, jobs: int) -> list:
    semaphore = asyncio.Semaphore(max(1, jobs))
    return await asyncio.gather(*(run_command(cmd, fname, semaphore) for cmd, fname in commands))


def run_points(points: list, out: Path, jobs: int):
    configs, logs = out / "sweep-configs", out / "logs"
    configs.mkdir(parents=True, exist_ok=True)
    logs.mkdir(parents=True, exist_ok=True)
    commands = []
    for point in points:
        path = configs / f"point-{point.index:03d}.json"
        path.write_text(point.config.to_json())
        cmd = [sys.executable, str(RUNNER), "--quiet", "run", "--config", str(path)]
        commands.append((cmd, logs / f"{point.nickname}.txt"))
    for point, code in zip(points, asyncio.run(_run_all(commands, jobs))):
        point.returncode = code


def fit_rates(records: list) -> dict:
    """Log-log slope of sup error against the budget, and the spread of M."""
    budgets = np.array([r.budget for r in records])
    errors = np.array([r.sup_error for r in records])
    ms = np.array([r.m for r in records])
    positive = errors > 0
    slope = float(np.polyfit(np.log(budgets[positive]), np.log(errors[positive]), 1)[0]) if positive.sum() >= 2 else math.nan
    spread = float(ms.max() / ms.min()) if ms.min() > 0 else math.inf
    return {"error_slope": slope, "m_max": float(ms.max()), "m_min": float(ms.min()), "m_spread": spread, "m_stable": spread <= M_SPREAD_LIMIT}


def _bound_summaries(info_path: Path) -> list:
    info = json.loads(info_path.read_text())
    bounds = info.get("bounds", {})
    return [BoundSummary(name, math.nan, bounds[name]["max_ratio"], bounds[name]["mean_ratio"]) for name in BOUND_NAMES if name in bounds]


def aggregate(points: list, out: Path) -> dict:
    """sweep.csv in sweep order plus budget.csv, the plot-ready error-vs-budget table."""
    rows, records, bound_reports = [], [], []
    for point in points:
        record = None
        status = "inadmissible" if not point.admissible else ("failed" if point.returncode != 0 else "finished")
        record_path = out / point.nickname / "record.csv"
        if status == "finished":
            if not record_path.is_file():
                status = "missing"
            else:
                record = read_record_csv(record_path)[0][1]
                records.append(record)
                bound_reports.append(_bound_summaries(out / point.nickname / f"{point.nickname}-info.json"))
        rows.append((point, status, record))

    columns = ["index", "nickname", "eta", "nu", "delta", "status", "reason"] + ConvergenceRecord.columns()
    with open(out / "sweep.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for point, status, record in rows:
            values = [getattr(record, c) for c in ConvergenceRecord.columns()] if record else [""] * len(ConvergenceRecord.columns())
            writer.writerow([point.index, point.nickname, format_cell(point.eta), format_cell(point.nu), format_cell(point.delta), status, point.reason] + [format_cell(v) for v in values])

    with open(out / "budget.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["budget", "sup_error", "m", "beta", "oscillation_rate"])
        for r in records:
            writer.writerow([format_cell(r.budget), format_cell(r.sup_error), format_cell(r.m), format_cell(r.beta), format_cell(r.budget - r.beta)])

    if len(records) < 2:
        raise InsufficientDataError(f"only {len(records)} run(s) finished; the sweep fit needs at least 2")
    fit = fit_rates(records)
    fit["growing_bounds"] = sorted(name for name, (_, growing) in ratio_growth(bound_reports).items() if growing)
    return fit


def cmd_sweep(config: RunConfig, jobs: int = 1) -> int:
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    points = build_points(config)
    admissible = [p for p in points if p.admissible]
    for p in points:
        if not p.admissible:
            console.warn(f"Skipping point {p.index} (eta={p.eta:.4g}, nu={p.nu:.4g}, delta={p.delta:.4g}): {p.reason}")
    if not admissible:
        raise ValidationError("every sweep point is inadmissible")
    if len(admissible) < MIN_ADMISSIBLE:
        raise ValidationError(f"only {len(admissible)} admissible sweep points, at least {MIN_ADMISSIBLE} are needed for the rate fit")

    start = time.time()
    run_points(admissible, out, jobs)
    fit = aggregate(points, out)

    lines = [
        f"points: {len(points)}, admissible: {len(admissible)}, finished: {sum(p.returncode == 0 for p in admissible)}",
        f"slope of sup error vs budget: {fit['error_slope']:.4f}",
        f"M range: [{fit['m_min']:.4g}, {fit['m_max']:.4g}], spread {fit['m_spread']:.3g} ({'stable' if fit['m_stable'] else 'unstable'})",
        f"bounds with growing ratios: {', '.join(fit['growing_bounds']) or 'none'}",
    ]
    (out / "sweep-summary.txt").write_text("\n".join(lines) + "\n")
    for line in lines:
        console.summary(line)
    console.done(f"Sweep finished in {time.time() - start:.1f} s")
    return 0 if all(p.returncode == 0 for p in admissible) else 2
