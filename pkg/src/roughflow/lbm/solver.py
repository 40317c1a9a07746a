"""Time stepping, boundary ops, and snapshot emission for the D2Q9 solver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InstabilityError, ParameterError
from . import backend
from .kernels_numpy import moments, zou_he_inlet, zou_he_outlet
from .lattice import CS2, FlowParams, LatticeSpec, equilibrium_field


@dataclass
class LbmState:
    """Populations plus cached moments at one timestep."""

    f: np.ndarray      # (9, nx, ny)
    rho: np.ndarray    # (nx, ny)
    ux: np.ndarray
    uy: np.ndarray
    t: int = 0

    def refresh_moments(self, solid):
        self.rho, self.ux, self.uy = moments(self.f, solid)


@dataclass(frozen=True)
class FieldSnapshot:
    """Macroscopic fields at one timestep; solid nodes hold quiet NaN."""

    t: int
    rho: np.ndarray
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray

    @property
    def solid(self) -> np.ndarray:
        return np.isnan(self.rho)

    @property
    def shape(self):
        return self.rho.shape


@dataclass(frozen=True)
class Schedule:
    total_steps: int
    snapshot_interval: int

    def __post_init__(self):
        if self.snapshot_interval < 1:
            raise ParameterError("snapshot interval must be >= 1")
        if self.total_steps < 0:
            raise ParameterError("total steps must be >= 0")


def initial_state(spec: LatticeSpec) -> LbmState:
    """Global equilibrium at rest: rho = 1, u = 0 everywhere."""
    rho = np.ones((spec.nx, spec.ny))
    zero = np.zeros_like(rho)
    f = equilibrium_field(rho, zero, zero)
    state = LbmState(f=f, rho=rho, ux=zero.copy(), uy=zero.copy(), t=0)
    return state


def _check_finite(f, t):
    if not np.all(np.isfinite(f)):
        bad = np.argwhere(~np.isfinite(f))[0]
        node = (int(bad[1]), int(bad[2]))
        finite = f[np.isfinite(f)]
        max_abs = float(np.max(np.abs(finite))) if finite.size else float("nan")
        raise InstabilityError(t, node, max_abs)


def collide_and_stream(
    state: LbmState,
    spec: LatticeSpec,
    params: FlowParams,
    periodic_x: bool = False,
    check_interval: int = 100,
) -> LbmState:
    """Advance one step: BGK collision, streaming, bounce-back, inlet/outlet."""
    f = backend.step(
        state.f, spec.mask, params.tau,
        params.inlet_speed, params.outlet_density, periodic_x,
    )
    t = state.t + 1
    if check_interval and t % check_interval == 0:
        _check_finite(f, t)
    rho, ux, uy = moments(f, spec.mask)
    if check_interval and t % check_interval == 0:
        fluid = ~spec.mask
        if np.any(rho[fluid] <= 0):
            bad = np.argwhere(fluid & (rho <= 0))[0]
            raise InstabilityError(t, (int(bad[0]), int(bad[1])),
                                   float(np.max(np.abs(f))))
    return LbmState(f=f, rho=rho, ux=ux, uy=uy, t=t)


def apply_inlet_velocity(state: LbmState, spec: LatticeSpec, inlet_u: float):
    """Impose (u, v) = (inlet_u, 0) on the fluid nodes of column 0."""
    zou_he_inlet(state.f, spec.mask, inlet_u)
    state.refresh_moments(spec.mask)


def apply_outlet_pressure(state: LbmState, spec: LatticeSpec, p0: float):
    """Impose p = p0 (rho = p0 / cs^2) on the fluid nodes of the last column."""
    zou_he_outlet(state.f, spec.mask, p0 / CS2)
    state.refresh_moments(spec.mask)


def snapshot_from_state(state: LbmState, spec: LatticeSpec) -> FieldSnapshot:
    solid = spec.mask
    rho = state.rho.copy()
    u = state.ux.copy()
    v = state.uy.copy()
    rho[solid] = np.nan
    u[solid] = np.nan
    v[solid] = np.nan
    return FieldSnapshot(t=state.t, rho=rho, u=u, v=v, p=CS2 * rho)


def run_simulation(
    spec: LatticeSpec,
    params: FlowParams,
    schedule: Schedule,
    periodic_x: bool = False,
):
    """Generator of FieldSnapshots at t = 0 and every snapshot_interval steps."""
    state = initial_state(spec)
    yield snapshot_from_state(state, spec)
    for _ in range(schedule.total_steps):
        state = collide_and_stream(state, spec, params, periodic_x=periodic_x)
        if state.t % schedule.snapshot_interval == 0:
            _check_finite(state.f, state.t)
            yield snapshot_from_state(state, spec)
