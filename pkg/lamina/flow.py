"""Manufactured Euler flows and the correctors that adapt them to the oscillating wall.

A reference flow is w0(t, y) = tau(t) W(y) with tau(t) = 1 + sin(omega t)/2 and
a closed-form divergence-free W tangent to y3 = 0. The forcing F0 is whatever
makes (w0, q) an exact Euler solution.
"""
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from lamina.constants import BOX_PERIOD, PERIOD_TOLERANCE, SOBOLEV_ORDER
from lamina.errors import ConfigurationError, DomainError, ValidationError
from lamina.fields import Grid, d, graded_nodes, inner, sobolev_sq
from lamina.geometry import FlatteningMap
from lamina.params import ParamTriple

FLOW_KINDS = ("shear", "vortex")
Q_MODES = ("zero", "cosine")


def _zeros(*arrays):
    return np.zeros(np.broadcast(*arrays).shape)


class ShearShape:
    """W = (m(y3) sin y2, m(y3) sin y1, 0), m = a exp(-c y3)."""

    kind = "shear"

    def __init__(self, amplitude: float, decay: float):
        self.amplitude = amplitude
        self.decay = decay

    def m(self, y3, n: int = 0):
        return self.amplitude * (-self.decay) ** n * np.exp(-self.decay * np.asarray(y3, float))

    def velocity(self, y1, y2, y3):
        m = self.m(y3)
        zero = _zeros(y1, y2, y3)
        return np.stack([zero + m * np.sin(y2), zero + m * np.sin(y1), zero])

    def gradient(self, y1, y2, y3):
        """[i, j] = D_j W_i"""
        m, dm = self.m(y3), self.m(y3, 1)
        zero = _zeros(y1, y2, y3)
        g = np.zeros((3, 3) + zero.shape)
        g[0, 1] = zero + m * np.cos(y2)
        g[0, 2] = zero + dm * np.sin(y2)
        g[1, 0] = zero + m * np.cos(y1)
        g[1, 2] = zero + dm * np.sin(y1)
        return g

    def advection(self, y1, y2, y3):
        """(W . grad) W"""
        m2 = self.m(y3) ** 2
        zero = _zeros(y1, y2, y3)
        return np.stack([zero + m2 * np.sin(y1) * np.cos(y2), zero + m2 * np.cos(y1) * np.sin(y2), zero])

    def wall_hessian(self, y1, y2):
        """[i, j, k] = D_j D_k W_i at y3 = 0 for i in (1, 2)."""
        m0 = self.amplitude
        zero = _zeros(y1, y2)
        h = np.zeros((2, 2, 2) + zero.shape)
        h[0, 1, 1] = zero - m0 * np.sin(y2)
        h[1, 0, 0] = zero - m0 * np.sin(y1)
        return h


class VortexShape:
    """W = curl(rho(y3) sin y2, 0, 0) = (0, rho' sin y2, -rho cos y2), rho = a y3 exp(-c y3)."""

    kind = "vortex"

    def __init__(self, amplitude: float, decay: float):
        self.amplitude = amplitude
        self.decay = decay

    def rho(self, y3, n: int = 0):
        y3 = np.asarray(y3, float)
        c = self.decay
        if n == 0:
            return self.amplitude * y3 * np.exp(-c * y3)
        return self.amplitude * (-c) ** (n - 1) * np.exp(-c * y3) * (n - c * y3)

    def velocity(self, y1, y2, y3):
        zero = _zeros(y1, y2, y3)
        return np.stack([zero, zero + self.rho(y3, 1) * np.sin(y2), zero - self.rho(y3) * np.cos(y2)])

    def gradient(self, y1, y2, y3):
        r, r1, r2 = self.rho(y3), self.rho(y3, 1), self.rho(y3, 2)
        zero = _zeros(y1, y2, y3)
        g = np.zeros((3, 3) + zero.shape)
        g[1, 1] = zero + r1 * np.cos(y2)
        g[1, 2] = zero + r2 * np.sin(y2)
        g[2, 1] = zero + r * np.sin(y2)
        g[2, 2] = zero - r1 * np.cos(y2)
        return g

    def advection(self, y1, y2, y3):
        r, r1, r2 = self.rho(y3), self.rho(y3, 1), self.rho(y3, 2)
        zero = _zeros(y1, y2, y3)
        return np.stack([zero, zero + (r1**2 - r * r2) * np.sin(y2) * np.cos(y2), zero + r * r1])

    def wall_hessian(self, y1, y2):
        zero = _zeros(y1, y2)
        h = np.zeros((2, 2, 2) + zero.shape)
        # W2(y', 0) = rho'(0) sin y2 = a sin y2
        h[1, 1, 1] = zero - self.amplitude * np.sin(y2)
        return h


def reference_grid(n: int = 16, decay: float = 1.0, depth: float = 20.0) -> Grid:
    """Grid for Sobolev norms of the reference data: x'-periodic, graded to depth/decay."""
    z = graded_nodes(depth / decay, 0.01 / decay, 64, 1.05)
    return Grid(n, n, z, BOX_PERIOD)


def sobolev_gram(arrays, grid: Grid, order: int) -> np.ndarray:
    """G[a, b] = <X_a, X_b>_{H^order} for arrays shaped (..., n1, n2, n3)."""
    count = len(arrays)
    gram = np.zeros((count, count))
    for total in range(order + 1):
        for g1 in range(total + 1):
            for g2 in range(total - g1 + 1):
                g3 = total - g1 - g2
                derivs = []
                for x in arrays:
                    for direction, times in ((1, g1), (2, g2), (3, g3)):
                        for _ in range(times):
                            x = d(x, grid, direction)
                    derivs.append(x)
                for a in range(count):
                    for b in range(a, count):
                        gram[a, b] += inner(derivs[a], derivs[b], grid)
    return gram + np.triu(gram, 1).T


class ReferenceFlow:
    def __init__(self, shape, frequency: float = 1.0, q_mode: str = "zero", q_amplitude: float = 0.5):
        if q_mode not in Q_MODES:
            raise DomainError(f"unknown pressure mode '{q_mode}'")
        self.shape = shape
        self.frequency = frequency
        self.q_mode = q_mode
        self.q_amplitude = q_amplitude if q_mode == "cosine" else 0.0

    @property
    def kind(self) -> str:
        return self.shape.kind

    @property
    def decay(self) -> float:
        return self.shape.decay

    def temporal(self, t):
        return 1.0 + 0.5 * np.sin(self.frequency * np.asarray(t, float))

    def temporal_dt(self, t):
        return 0.5 * self.frequency * np.cos(self.frequency * np.asarray(t, float))

    def initial(self, y1, y2, y3):
        """W0 = w0(0, .)"""
        return self.velocity(0.0, y1, y2, y3)

    def velocity(self, t, y1, y2, y3):
        return self.temporal(t) * self.shape.velocity(y1, y2, y3)

    def velocity_dt(self, t, y1, y2, y3):
        return self.temporal_dt(t) * self.shape.velocity(y1, y2, y3)

    def velocity_gradient(self, t, y1, y2, y3):
        return self.temporal(t) * self.shape.gradient(y1, y2, y3)

    def pressure(self, t, y1, y2, y3):
        zero = _zeros(y1, y2, y3)
        return zero + self.q_amplitude * np.cos(y1) * np.exp(-np.asarray(y3, float))

    def pressure_gradient(self, t, y1, y2, y3):
        zero = _zeros(y1, y2, y3)
        e = self.q_amplitude * np.exp(-np.asarray(y3, float))
        return np.stack([zero - e * np.sin(y1), zero, zero - e * np.cos(y1)])

    def forcing(self, t, y1, y2, y3):
        """F0 = d_t w0 + (w0 . grad) w0 + grad q"""
        tau = self.temporal(t)
        return (
            self.temporal_dt(t) * self.shape.velocity(y1, y2, y3)
            + tau**2 * self.shape.advection(y1, y2, y3)
            + self.pressure_gradient(t, y1, y2, y3)
        )

    def euler_residual(self, t, y1, y2, y3):
        """Pointwise d_t w0 + (w0 . grad) w0 + grad q - F0, advection from the gradient."""
        w = self.velocity(t, y1, y2, y3)
        grad_w = self.velocity_gradient(t, y1, y2, y3)
        adv = np.einsum("j...,ij...->i...", w, grad_w)
        return self.velocity_dt(t, y1, y2, y3) + adv + self.pressure_gradient(t, y1, y2, y3) - self.forcing(t, y1, y2, y3)

    def divergence(self, t, y1, y2, y3):
        g = self.velocity_gradient(t, y1, y2, y3)
        return g[0, 0] + g[1, 1] + g[2, 2]

    # Sobolev norms of the reference data on a dedicated grid

    @cached_property
    def _gram(self):
        grid = reference_grid(decay=self.decay)
        y = grid.coords()
        pieces = [
            self.shape.velocity(*y),
            self.shape.advection(*y),
            self.pressure_gradient(0.0, *y),
        ]
        return {
            order: sobolev_gram(pieces, grid, order) for order in (0, 1, SOBOLEV_ORDER - 1, SOBOLEV_ORDER)
        }

    def _combo_norm(self, coeffs, order):
        c = np.asarray(coeffs, float)
        return math.sqrt(max(float(c @ self._gram[order] @ c), 0.0))

    def hs_norm(self, t=0.0, order: int = SOBOLEV_ORDER) -> float:
        """||w0(t)||_{H^order}"""
        return abs(float(self.temporal(t))) * self._combo_norm([1, 0, 0], order)

    def sup_hs_norm(self, t_final: float, order: int = SOBOLEV_ORDER, samples: int = 2001) -> float:
        """sup over [0, t_final] of ||w0(t)||_{H^order}"""
        times = np.linspace(0.0, t_final, samples)
        return float(np.max(np.abs(self.temporal(times)))) * self._combo_norm([1, 0, 0], order)

    def forcing_norm(self, t=0.0, order: int = SOBOLEV_ORDER - 1) -> float:
        """||F0(t)||_{H^order}"""
        tau = float(self.temporal(t))
        return self._combo_norm([float(self.temporal_dt(t)), tau**2, 1.0], order)

    def velocity_dt_norm(self, t=0.0, order: int = 1) -> float:
        """||d_t w0(t)||_{H^order}"""
        return abs(float(self.temporal_dt(t))) * self._combo_norm([1, 0, 0], order)


def manufactured_euler(kind: str, amplitude: float, decay: float, frequency: float = 1.0, q_mode: str = "zero", q_amplitude: float = 0.5) -> ReferenceFlow:
    if kind not in FLOW_KINDS:
        raise DomainError(f"unknown flow kind '{kind}'")
    if not (amplitude > 0 and decay > 0):
        raise ValidationError("flow amplitude and decay must be positive")
    shape = ShearShape(amplitude, decay) if kind == "shear" else VortexShape(amplitude, decay)
    return ReferenceFlow(shape, frequency, q_mode, q_amplitude)


def check_periods(fmap: FlatteningMap, box_period: float = BOX_PERIOD):
    """The wall oscillation must tile the periodic box."""
    if fmap.profile.kind == "flat":
        return
    cells = box_period / fmap.oscillation_period
    if abs(cells - round(cells)) > PERIOD_TOLERANCE * max(cells, 1.0) or round(cells) < 1:
        raise ConfigurationError(
            f"box period {box_period} is not a multiple of the wall period delta*P = {fmap.oscillation_period}"
        )


class CorrectorPair:
    """The correctors w~ and w. Both scale with tau(t) like w0."""

    def __init__(self, flow: ReferenceFlow, p: ParamTriple, fmap: FlatteningMap):
        self.flow = flow
        self.p = p
        self.fmap = fmap
        self.coupling = p.delta**1.5 + p.delta ** (p.alpha - 1)
        self.scale = p.delta ** (p.alpha - 2.5)

    # w~ = -w0 + coupling e3 (-D1g w0_1 - D2g w0_2)
    def _tilde_spatial(self, y1, y2, y3):
        W = self.flow.shape.velocity(y1, y2, y3)
        d1g, d2g = self.fmap.wall_gradient(y1, y2)
        out = -W
        out[2] = out[2] + self.coupling * (-d1g * W[0] - d2g * W[1])
        return out

    def _tilde_gradient_spatial(self, y1, y2, y3):
        W = self.flow.shape.velocity(y1, y2, y3)
        gW = self.flow.shape.gradient(y1, y2, y3)
        d1g, d2g = self.fmap.wall_gradient(y1, y2)
        h11, h12, h22 = self.fmap.wall_hessian(y1, y2)
        inv = 1.0 / self.p.delta
        out = -gW
        # D_j of D_k g(y'/delta) is D_j D_k g / delta
        dgd = {(0, 0): h11, (0, 1): h12, (1, 0): h12, (1, 1): h22}
        for j in range(3):
            term = -d1g * gW[0, j] - d2g * gW[1, j]
            if j < 2:
                term = term - inv * (dgd[(0, j)] * W[0] + dgd[(1, j)] * W[1])
            out[2, j] = out[2, j] + self.coupling * term
        return out

    def tilde(self, t, y1, y2, y3):
        return self.flow.temporal(t) * self._tilde_spatial(y1, y2, y3)

    def tilde_dt(self, t, y1, y2, y3):
        return self.flow.temporal_dt(t) * self._tilde_spatial(y1, y2, y3)

    def tilde_gradient(self, t, y1, y2, y3):
        return self.flow.temporal(t) * self._tilde_gradient_spatial(y1, y2, y3)

    def velocity_spatial(self, y1, y2, y3):
        return self.flow.shape.velocity(y1, y2, y3) - self.scale * self._tilde_spatial(y1, y2, y3)

    def gradient_spatial(self, y1, y2, y3):
        return self.flow.shape.gradient(y1, y2, y3) - self.scale * self._tilde_gradient_spatial(y1, y2, y3)

    def velocity(self, t, y1, y2, y3):
        """w = w0 - delta^(alpha-5/2) w~"""
        return self.flow.temporal(t) * self.velocity_spatial(y1, y2, y3)

    def velocity_dt(self, t, y1, y2, y3):
        return self.flow.temporal_dt(t) * self.velocity_spatial(y1, y2, y3)

    def velocity_gradient(self, t, y1, y2, y3):
        return self.flow.temporal(t) * self.gradient_spatial(y1, y2, y3)

    def wall_velocity(self, t, y1, y2):
        """w(t, y', 0)"""
        return self.velocity(t, y1, y2, np.zeros(np.broadcast(y1, y2).shape))

    def wall_tangential_gradient(self, t, y1, y2):
        """[i, j] = D_j w_i(t, y', 0) for j in (1, 2)."""
        return self.velocity_gradient(t, y1, y2, np.zeros(np.broadcast(y1, y2).shape))[:, :2]

    def boundary_divergence(self, t, y1, y2):
        """A(t, y') = D1 w1 + D2 w2 at y3 = 0."""
        g = self.velocity_gradient(t, y1, y2, np.zeros(np.broadcast(y1, y2).shape))
        return g[0, 0] + g[1, 1]

    def boundary_divergence_dt(self, t, y1, y2):
        tau = float(self.flow.temporal(t))
        return self.boundary_divergence(t, y1, y2) * (float(self.flow.temporal_dt(t)) / tau)

    def boundary_divergence_gradient(self, t, y1, y2):
        """(D1 A, D2 A). w_1, w_2 are (1 + delta^(alpha-5/2)) w0_1, w0_2."""
        h = self.flow.shape.wall_hessian(y1, y2)
        factor = float(self.flow.temporal(t)) * (1.0 + self.scale)
        return factor * np.stack([h[0, 0, j] + h[1, 1, j] for j in range(2)])

    def b_divergence(self, t, y1, y2, y3):
        """div(B w), pointwise from the closed forms."""
        g = self.velocity_gradient(t, y1, y2, y3)
        d1g, d2g = self.fmap.wall_gradient(y1, y2)
        # B does not depend on y3, so only D3 acts on (Bw)_3 = w3 - s (D1g w1 + D2g w2)
        d3bw = g[2, 2] - self.fmap.slope * (d1g * g[0, 2] + d2g * g[1, 2])
        return g[0, 0] + g[1, 1] + d3bw

    def wall_flux(self, t, y1, y2):
        """(Bw)_3 at y3 = 0"""
        w = self.wall_velocity(t, y1, y2)
        d1g, d2g = self.fmap.wall_gradient(y1, y2)
        return w[2] - self.fmap.slope * (d1g * w[0] + d2g * w[1])


def build_correctors(flow: ReferenceFlow, p: ParamTriple, fmap: FlatteningMap, box_period: float = BOX_PERIOD) -> CorrectorPair:
    check_periods(fmap, box_period)
    if fmap.delta != p.delta or fmap.alpha != p.alpha:
        raise ConfigurationError("flattening map and parameters disagree on delta or alpha")
    return CorrectorPair(flow, p, fmap)


@dataclass(frozen=True)
class BoundRow:
    name: str
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else math.inf)


def corrector_grid(fmap: FlatteningMap, decay: float = 1.0, minimum: int = 16) -> Grid:
    """Reference grid fine enough in x' to carry the wall oscillation spectrally."""
    n = minimum
    if fmap.profile.kind != "flat":
        modes = BOX_PERIOD / fmap.oscillation_period + 2
        while n < 4 * modes:
            n *= 2
    z = graded_nodes(20.0 / decay, 0.01 / decay, 64, 1.05)
    return Grid(n, n, z, BOX_PERIOD)


def wprop_report(pair: CorrectorPair, flow: ReferenceFlow, grid: Optional[Grid] = None, t: float = 0.0) -> list:
    """Left- and right-hand sides of the corrector bounds at time t."""
    grid = corrector_grid(pair.fmap, flow.decay) if grid is None else grid
    y1, y2, y3 = grid.coords()
    w0 = flow.hs_norm(t)
    data_rhs = w0**2 + flow.forcing_norm(t)

    def h1(data):
        return math.sqrt(sobolev_sq(data, grid, 1))

    def l2(data):
        return math.sqrt(inner(data, data, grid))

    tilde = pair.tilde(t, y1, y2, y3)
    tilde_dt = pair.tilde_dt(t, y1, y2, y3)
    w = pair.velocity(t, y1, y2, y3)
    gw = pair.velocity_gradient(t, y1, y2, y3)
    wall = pair.wall_velocity(t, y1[..., 0], y2[..., 0])
    wall_grad = pair.wall_tangential_gradient(t, y1[..., 0], y2[..., 0])
    area = grid.h1 * grid.h2
    wall_h1 = math.sqrt(area * float(np.sum(wall**2) + np.sum(wall_grad**2)))

    rows = [
        BoundRow("tilde_dt_l2", l2(tilde_dt), data_rhs),
        BoundRow("w0_dt_h1", flow.velocity_dt_norm(t, 1), data_rhs),
        BoundRow("wall_trace_h1", wall_h1, w0),
        BoundRow("tilde_h1", h1(tilde), w0),
        BoundRow("w_h1", h1(w), w0),
        BoundRow("w_sup", float(np.max(np.abs(w))), w0),
        BoundRow("grad_w_sup", float(np.max(np.abs(gw))), w0),
        BoundRow("wall_trace_sup", float(np.max(np.abs(wall))), w0),
        BoundRow(
            "w_minus_w0_sup",
            float(np.max(np.abs(w - flow.velocity(t, y1, y2, y3)))),
            pair.scale * w0,
        ),
    ]
    return rows
