"""Assemble every object a command needs from a RunConfig."""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from lamina import console
from lamina.config import RunConfig
from lamina.constants import BOX_PERIOD
from lamina.errors import ConfigurationError
from lamina.fields import Grid
from lamina.flow import CorrectorPair, ReferenceFlow, build_correctors, manufactured_euler
from lamina.geometry import BoundaryProfile, FlatteningMap
from lamina.layer import BoundaryLayerField, build_bl
from lamina.params import ParamTriple, Verdict, beta_default, constant_beta, is_admissible
from lamina.profiles import ProfilePair, build_profiles
from lamina.viscosity import ViscositySpec


def boundary_profile(config: RunConfig) -> BoundaryProfile:
    geo = config.geometry
    if geo.profile == "flat":
        return BoundaryProfile.flat()
    if geo.profile == "cosine":
        return BoundaryProfile.cosine(geo.amplitude, geo.period)
    if geo.profile == "tabulated":
        if geo.table is None:
            raise ConfigurationError("geometry.table must name a .npy file for a tabulated profile")
        return BoundaryProfile.tabulated(np.load(geo.table), geo.period)
    raise ConfigurationError(f"unknown geometry.profile '{geo.profile}'")


def beta_choice(config: RunConfig):
    beta = config.params.beta
    if beta == "default":
        return beta_default
    if isinstance(beta, (int, float)):
        return constant_beta(float(beta))
    raise ConfigurationError(f"params.beta must be 'default' or a number, got {beta!r}")


_PROFILES = None


def shared_profiles() -> ProfilePair:
    """phi and psi are parameter free; build them once per process."""
    global _PROFILES
    if _PROFILES is None:
        _PROFILES = build_profiles()
    return _PROFILES


@dataclass
class Experiment:
    config: RunConfig
    profile: BoundaryProfile
    fmap: FlatteningMap
    flow: ReferenceFlow
    params: ParamTriple
    verdict: Verdict

    @cached_property
    def profiles(self) -> ProfilePair:
        return shared_profiles()

    @cached_property
    def pair(self) -> CorrectorPair:
        return build_correctors(self.flow, self.params, self.fmap, BOX_PERIOD)

    @cached_property
    def layer(self) -> BoundaryLayerField:
        return build_bl(self.pair, self.profiles, self.params)

    @cached_property
    def grid(self) -> Grid:
        g = self.config.grid
        wall = g.wall_spacing if g.wall_spacing is not None else self.params.layer_width / 8
        grid = Grid.graded(g.n1, g.n2, g.n3, g.height, wall, g.max_ratio)
        period = None if self.profile.kind == "flat" else self.fmap.oscillation_period
        report = grid.resolution_report(self.params.layer_width, period, self.fmap.lift * self.profile.sup())
        if not report["oscillation_resolved"]:
            console.warn(
                f"Wall oscillation (period {period:.4g}) is under-resolved by h1 = {grid.h1:.4g}; "
                "results carry an x' discretization error"
            )
        if not report["layer_resolved"]:
            console.warn(f"Boundary layer of width {self.params.layer_width:.3g} has fewer than 8 nodes")
        if not report["height_ok"]:
            console.warn(f"Lid height {grid.height:.4g} is below {report['min_height']:.4g}; the reference flow is truncated")
        return grid

    @cached_property
    def viscosity(self) -> ViscositySpec:
        g = self.config.grid
        return ViscositySpec.from_block(self.config.viscosity, 8 * BOX_PERIOD / g.n1)

    @property
    def budget(self) -> float:
        return self.params.budget


def build_experiment(config: RunConfig) -> Experiment:
    """Everything but the grid-dependent pieces is built eagerly, so bad configs fail fast."""
    geo, visc, prm, fl = config.geometry, config.viscosity, config.params, config.flow
    profile = boundary_profile(config)
    fmap = FlatteningMap(profile, geo.delta, geo.alpha)
    flow = manufactured_euler(fl.kind, fl.amplitude, fl.decay, fl.frequency, fl.q_mode, fl.q_amplitude)
    params = ParamTriple(
        eta=visc.eta,
        nu=visc.nu,
        delta=geo.delta,
        alpha=geo.alpha,
        lam=visc.lam,
        k0=prm.k0,
        delta0=prm.delta0,
        epsilon=prm.epsilon,
        w0_sup_norm=flow.sup_hs_norm(config.time.t_final),
        beta=beta_choice(config),
    )
    return Experiment(config, profile, fmap, flow, params, is_admissible(params))
