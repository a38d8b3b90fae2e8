"""Runner for the whole project using cli flags"""
import functools
import json
import sys

import click

from lamina import console
from lamina.config import load_config
from lamina.errors import CheckFailure, LaminaError


def config_options(f):
    """--config, --preset, --out and --seed, shared by every config-driven command."""

    @click.option("--seed", type=int, default=None, help="Random seed (perturbations, sampling)")
    @click.option("--out", default=None, help="Output directory")
    @click.option("--preset", default=None, help="Named preset applied before the config file")
    @click.option(
        "--config",
        "config_path",
        type=click.Path(dir_okay=False),
        default=None,
        help="JSON config file",
    )
    @functools.wraps(f)
    def wrapper(config_path, preset, out, seed, **kwargs):
        def load():
            return load_config(config_path, preset, output=out, seed=seed)

        return f(load=load, **kwargs)

    return wrapper


def guarded(task):
    """Run a command body, mapping lamina errors to their exit codes"""
    try:
        code = task()
    except LaminaError as e:
        console.fail(f"{type(e).__name__}: {e}")
        if isinstance(e, CheckFailure) and e.witness:
            console.fail(f"witness: {json.dumps(e.witness, default=str)}")
        sys.exit(e.exit_code)
    sys.exit(code)


@click.group(context_settings={"auto_envvar_prefix": "LAMINA"})
@click.option("--quiet", is_flag=True, default=False, help="Only print failures")
def cli(quiet):
    """Inviscid-limit laboratory: checks, runs, sweeps and reports"""
    console.set_quiet(quiet)


@cli.command()
@config_options
def check(load):
    """Static verifications of the configured triple"""
    from lamina.check import cmd_check

    guarded(lambda: cmd_check(load()))


@cli.command()
@config_options
def run(load):
    """Solve and audit one triple"""
    from lamina.run import cmd_run

    guarded(lambda: cmd_run(load()))


@cli.command()
@config_options
@click.option("--jobs", type=int, default=1, help="Concurrent runs")
def sweep(load, jobs):
    """Run every admissible point of the sweep grid and fit the rates"""
    from lamina.sweep import cmd_sweep

    guarded(lambda: cmd_sweep(load(), jobs=jobs))


@cli.command()
@click.option("--out", default="runs", help="Output directory holding the runs")
@click.option("--plot", is_flag=True, default=False, help="Also write budget.png")
def report(out, plot):
    """Merge the records of finished runs"""
    from lamina.report import cmd_report

    guarded(lambda: cmd_report(out, plot=plot))


if __name__ == "__main__":
    cli()
