"""Run configuration: dataclass blocks, JSON round-trip, presets and env overrides."""
import copy
import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from lamina.constants import PRESETS
from lamina.errors import ConfigurationError

ENV_PREFIX = "LAMINA__"


@dataclass
class GeometricGrid:
    """The sequence start, start*ratio, ..., start*ratio**(count-1)."""

    start: float = 0.1
    ratio: float = 0.5
    count: int = 4

    def values(self) -> list:
        return [self.start * self.ratio**k for k in range(self.count)]


@dataclass
class GeometryBlock:
    profile: str = "cosine"  # flat | cosine | tabulated
    amplitude: float = 0.2
    period: float = 2 * math.pi
    delta: float = 0.0625
    alpha: float = 3.0
    table: Optional[str] = None  # .npy file, tabulated profile only


@dataclass
class ViscosityBlock:
    eta: float = 1e-2
    nu: float = 1e-3
    lam: float = 0.5
    kind: str = "diagonal"  # diagonal | checkerboard
    perturbation: float = 0.1  # relative to nu
    cell_size: Optional[float] = None  # default 8*h1
    flip_interval: float = 0.1


@dataclass
class ParamsBlock:
    k0: float = 1.0
    delta0: float = 0.1
    epsilon: float = 0.1
    beta: Union[str, float] = "default"


@dataclass
class FlowBlock:
    kind: str = "shear"  # shear | vortex
    amplitude: float = 1.0
    decay: float = 1.0
    frequency: float = 1.0
    q_mode: str = "zero"  # zero | cosine
    q_amplitude: float = 0.5
    initial_perturbation: float = 0.0
    forcing_perturbation: float = 0.0


@dataclass
class GridBlock:
    n1: int = 32
    n2: int = 32
    n3: int = 64  # minimum; raised if the grading ratio demands it
    height: float = 6.0
    max_ratio: float = 1.05
    wall_spacing: Optional[float] = None  # default sqrt(theta*nu)/8


@dataclass
class TimeBlock:
    t_final: float = 1.0
    dt: float = 0.01
    snapshot_every: int = 1
    cfl: float = 0.5


@dataclass
class CheckBlock:
    sandwich_samples: int = 1_000_000
    identity_samples: int = 10_000
    eigen_points: int = 1000
    theta_nu: GeometricGrid = field(
        default_factory=lambda: GeometricGrid(start=1e-6, ratio=0.1, count=5)
    )


@dataclass
class SweepBlock:
    mode: str = "paired"  # paired | product
    eta: Optional[GeometricGrid] = None
    nu: Optional[GeometricGrid] = None
    delta: Optional[GeometricGrid] = None
    nu_power: Optional[float] = None
    delta_match_eta: bool = False


@dataclass
class RunConfig:
    geometry: GeometryBlock = field(default_factory=GeometryBlock)
    viscosity: ViscosityBlock = field(default_factory=ViscosityBlock)
    params: ParamsBlock = field(default_factory=ParamsBlock)
    flow: FlowBlock = field(default_factory=FlowBlock)
    grid: GridBlock = field(default_factory=GridBlock)
    time: TimeBlock = field(default_factory=TimeBlock)
    check: CheckBlock = field(default_factory=CheckBlock)
    sweep: SweepBlock = field(default_factory=SweepBlock)
    output: str = "runs"
    seed: int = 0

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        return _build(cls, data, "")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=4, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"config is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigurationError("config must be a JSON object")
        return cls.from_dict(data)


# Nested blocks, keyed by (owner class, field name)
_NESTED = {
    (RunConfig, "geometry"): GeometryBlock,
    (RunConfig, "viscosity"): ViscosityBlock,
    (RunConfig, "params"): ParamsBlock,
    (RunConfig, "flow"): FlowBlock,
    (RunConfig, "grid"): GridBlock,
    (RunConfig, "time"): TimeBlock,
    (RunConfig, "check"): CheckBlock,
    (RunConfig, "sweep"): SweepBlock,
    (CheckBlock, "theta_nu"): GeometricGrid,
    (SweepBlock, "eta"): GeometricGrid,
    (SweepBlock, "nu"): GeometricGrid,
    (SweepBlock, "delta"): GeometricGrid,
}


def _build(cls, data, prefix):
    if not isinstance(data, dict):
        raise ConfigurationError(f"config block '{prefix.rstrip('.') or 'root'}' must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigurationError(f"unknown config key '{prefix}{key}'")
        nested = _NESTED.get((cls, key))
        if nested is not None and value is not None:
            value = _build(nested, value, f"{prefix}{key}.")
        kwargs[key] = value
    return cls(**kwargs)


def merge(base: dict, override: dict) -> dict:
    """Recursively merge override into a copy of base"""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def env_overrides(environ=None) -> dict:
    """Collect LAMINA__BLOCK__FIELD=value overrides into a nested dict."""
    environ = os.environ if environ is None else environ
    out = {}
    for name, raw in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        path = [p.lower() for p in name[len(ENV_PREFIX) :].split("__") if p]
        if not path:
            continue
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        for part in path[:-1]:
            node = node.setdefault(part, {})
        node[path[-1]] = value
    return out


def load_config(path=None, preset=None, environ=None, **flags) -> RunConfig:
    """Defaults < preset < file < environment < flags."""
    data = RunConfig().to_dict()
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigurationError(
                f"unknown preset '{preset}', choose from {sorted(PRESETS)}"
            )
        data = merge(data, PRESETS[preset])
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"config file {path} does not exist")
        # Validate the file on its own so unknown keys are reported against it
        filecfg = RunConfig.from_json(path.read_text())
        data = merge(data, _explicit(json.loads(path.read_text()), filecfg))
    data = merge(data, env_overrides(environ))
    data = merge(data, {k: v for k, v in flags.items() if v is not None})
    return RunConfig.from_dict(data)


def _explicit(raw: dict, parsed: RunConfig) -> dict:
    # Only keys present in the file override lower layers
    full = parsed.to_dict()

    def pick(r, f):
        return {
            k: pick(v, f[k]) if isinstance(v, dict) and isinstance(f.get(k), dict) else f[k]
            for k, v in r.items()
        }

    return pick(raw, full)
