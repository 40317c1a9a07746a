"""The physics-informed surrogate: network, normalization, field prediction.

All model-facing coordinates and fields are non-dimensional: lengths by the
mean gap H, velocities by the inlet speed, time by H / inlet_speed, and
gauge pressure (relative to the outlet) by inlet_speed^2.  Network inputs
are additionally shifted/scaled to [-1, 1] per channel; outputs are
standardized per channel against the training labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .. import autodiff as ad
from ..errors import ParameterError
from ..lbm.solver import FieldSnapshot

MACRO_FIELDS = ("u", "v", "p", "rho")  # output channel order
N_MACRO = 4
N_KINETIC = 9


@dataclass(frozen=True)
class FlowDomain:
    """Geometry and scales tying lattice coordinates to model coordinates."""

    mask: np.ndarray            # (nx, ny) bool, True = solid
    gap: float                  # mean channel gap H, lattice units
    inlet_speed: float
    time_window: tuple[float, float]   # lattice timesteps covered by data
    pressure_ref: float         # lattice pressure subtracted before scaling

    def __post_init__(self):
        if self.gap <= 0 or self.inlet_speed <= 0:
            raise ParameterError("gap and inlet speed must be positive")
        object.__setattr__(self, "mask", np.asarray(self.mask, dtype=bool))

    @property
    def nx(self):
        return self.mask.shape[0]

    @property
    def ny(self):
        return self.mask.shape[1]

    @property
    def time_scale(self):
        return self.gap / self.inlet_speed

    def to_model_coords(self, x, y, t):
        """Lattice (x, y, t) -> non-dimensional (x~, y~, t~)."""
        return (np.asarray(x) / self.gap,
                np.asarray(y) / self.gap,
                np.asarray(t) / self.time_scale)

    def model_time(self, t):
        return t / self.time_scale

    def velocity_to_model(self, u):
        return np.asarray(u) / self.inlet_speed

    def pressure_to_model(self, p):
        return (np.asarray(p) - self.pressure_ref) / self.inlet_speed**2

    def velocity_from_model(self, u_nd):
        return np.asarray(u_nd) * self.inlet_speed

    def pressure_from_model(self, p_nd):
        return np.asarray(p_nd) * self.inlet_speed**2 + self.pressure_ref


@dataclass
class PinnModel:
    """Network parameters plus the normalization records that make the
    raw outputs physically meaningful."""

    net_spec: ad.NetworkSpec
    params: ad.ParameterSet
    in_shift: np.ndarray        # (din,) non-dim input -> [-1, 1]
    in_scale: np.ndarray
    out_shift: np.ndarray       # (4,) macroscopic channels (u, v, p, rho)
    out_scale: np.ndarray
    reynolds: float
    kinetic_head: bool = False
    extra_features: tuple = ()  # constant geometry descriptors, appended

    def __post_init__(self):
        din = 3 + len(self.extra_features)
        if self.net_spec.input_width != din:
            raise ParameterError(
                f"network input width {self.net_spec.input_width} != {din}"
            )
        dout = N_MACRO + (N_KINETIC if self.kinetic_head else 0)
        if self.net_spec.output_width != dout:
            raise ParameterError(
                f"network output width {self.net_spec.output_width} != {dout}"
            )
        if self.reynolds <= 0:
            raise ParameterError("Reynolds number must be positive")
        self.in_shift = np.asarray(self.in_shift, dtype=np.float64)
        self.in_scale = np.asarray(self.in_scale, dtype=np.float64)
        self.out_shift = np.asarray(self.out_shift, dtype=np.float64)
        self.out_scale = np.asarray(self.out_scale, dtype=np.float64)
        if np.any(self.in_scale <= 0) or np.any(self.out_scale <= 0):
            raise ParameterError("normalization scales must be positive")

    def with_params(self, params: ad.ParameterSet) -> "PinnModel":
        return replace(self, params=params)

    def net_inputs(self, points_nd) -> np.ndarray:
        """Map non-dim (x~, y~, t~) points (N, 3) to network inputs."""
        pts = np.atleast_2d(np.asarray(points_nd, dtype=np.float64))
        if pts.shape[1] != 3:
            raise ParameterError("points must be (N, 3) in (x~, y~, t~)")
        if self.extra_features:
            extra = np.broadcast_to(
                np.asarray(self.extra_features, dtype=np.float64),
                (pts.shape[0], len(self.extra_features)),
            )
            pts = np.hstack([pts, extra])
        return (pts - self.in_shift) / self.in_scale

    def tape(self, points_nd, need_input_derivs=False) -> ad.Tape:
        return ad.forward_tape(
            self.params, self.net_inputs(points_nd),
            self.net_spec.activation, need_input_derivs=need_input_derivs,
        )

    def macro_outputs(self, points_nd) -> np.ndarray:
        """Denormalized non-dim (u, v, p, rho), shape (N, 4)."""
        y = self.tape(points_nd).y
        return y[:, :N_MACRO] * self.out_scale + self.out_shift

    def kinetic_outputs(self, points_nd) -> np.ndarray:
        if not self.kinetic_head:
            raise ParameterError("model has no kinetic head")
        return self.tape(points_nd).y[:, N_MACRO:]


def normalization_from_domain(domain: FlowDomain):
    """Input shift/scale mapping the space-time training box to [-1, 1]."""
    x_hi = (domain.nx - 1) / domain.gap
    y_hi = (domain.ny - 1) / domain.gap
    t_lo = domain.model_time(domain.time_window[0])
    t_hi = domain.model_time(domain.time_window[1])
    lo = np.array([0.0, 0.0, t_lo])
    hi = np.array([x_hi, y_hi, max(t_hi, t_lo)])
    shift = 0.5 * (lo + hi)
    scale = np.maximum(0.5 * (hi - lo), 1e-12)
    return shift, scale


def output_normalization_from_labels(labels):
    """Per-channel standardization (mean, std with a small floor)."""
    labels = np.asarray(labels, dtype=np.float64)
    shift = labels.mean(axis=0)
    scale = np.maximum(labels.std(axis=0), 1e-8)
    return shift, scale


def build_model(
    domain: FlowDomain,
    reynolds: float,
    labels=None,
    hidden_layers: int = 8,
    hidden_width: int = 128,
    activation: str = "tanh",
    init_seed: int = 0,
    kinetic_head: bool = False,
    extra_features: tuple = (),
) -> PinnModel:
    """Initialize a model for a domain; labels set output normalization."""
    in_shift, in_scale = normalization_from_domain(domain)
    if extra_features:
        in_shift = np.concatenate([in_shift, np.zeros(len(extra_features))])
        in_scale = np.concatenate([in_scale, np.ones(len(extra_features))])
    if labels is not None and len(labels):
        out_shift, out_scale = output_normalization_from_labels(labels)
    else:
        out_shift = np.zeros(N_MACRO)
        out_scale = np.ones(N_MACRO)
    spec = ad.NetworkSpec(
        input_width=3 + len(extra_features),
        hidden_layers=hidden_layers,
        hidden_width=hidden_width,
        output_width=N_MACRO + (N_KINETIC if kinetic_head else 0),
        activation=activation,
        init_seed=init_seed,
    )
    return PinnModel(
        net_spec=spec,
        params=ad.init_parameters(spec),
        in_shift=in_shift,
        in_scale=in_scale,
        out_shift=out_shift,
        out_scale=out_scale,
        reynolds=reynolds,
        kinetic_head=kinetic_head,
        extra_features=tuple(extra_features),
    )


def predict_fields(model: PinnModel, domain: FlowDomain, t: float) -> FieldSnapshot:
    """Evaluate the macroscopic head on the full grid at lattice time t."""
    nx, ny = domain.nx, domain.ny
    fluid = ~domain.mask
    xi, yi = np.nonzero(fluid)
    xs, ys, ts = domain.to_model_coords(
        xi.astype(float), yi.astype(float), np.full(xi.shape, float(t)))
    pts = np.stack([xs, ys, ts], axis=1)
    out = model.macro_outputs(pts)

    def grid(values):
        g = np.full((nx, ny), np.nan)
        g[xi, yi] = values
        return g

    u = grid(domain.velocity_from_model(out[:, 0]))
    v = grid(domain.velocity_from_model(out[:, 1]))
    p = grid(domain.pressure_from_model(out[:, 2]))
    rho = grid(out[:, 3])
    return FieldSnapshot(t=int(round(t)), rho=rho, u=u, v=v, p=p)


def model_vorticity(model: PinnModel, domain: FlowDomain, t: float) -> np.ndarray:
    """Vorticity dv/dx - du/dy in lattice units via exact derivatives."""
    fluid = ~domain.mask
    xi, yi = np.nonzero(fluid)
    xs, ys, ts = domain.to_model_coords(
        xi.astype(float), yi.astype(float), np.full(xi.shape, float(t)))
    pts = np.stack([xs, ys, ts], axis=1)
    tape = model.tape(pts, need_input_derivs=True)
    jac = tape.jac  # (N, dout, din) in network coordinates
    # chain to non-dim coords, then to lattice units (factor U_i / H)
    dv_dx = model.out_scale[1] * jac[:, 1, 0] / model.in_scale[0]
    du_dy = model.out_scale[0] * jac[:, 0, 1] / model.in_scale[1]
    omega_nd = dv_dx - du_dy
    omega = np.full(domain.mask.shape, np.nan)
    omega[xi, yi] = omega_nd * domain.inlet_speed / domain.gap
    return omega
