"""Fractal rough-wall profiles and their rasterization onto the lattice.

Profiles are superpositions of geometrically scaled cosines with per-mode
random phases.  Phases come from a counter-based generator keyed by
(seed, mode index), so extending the mode range never perturbs the phases
of existing modes.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import GeometryError, ParameterError


class Side(Enum):
    TOP = "top"
    BOTTOM = "bottom"


@dataclass(frozen=True)
class FractalSurfaceSpec:
    """Parameters of a self-affine cosine-superposition profile.

    ``amplitude`` is the spectral amplitude (lattice units), ``gamma`` the
    frequency-scaling factor (> 1), ``fractal_dimension`` in (1, 2).
    ``phases``, when given, overrides the seeded random phases and must
    supply one value per mode in [0, 2*pi).
    """

    amplitude: float
    gamma: float = 1.5
    fractal_dimension: float = 1.5
    n_min: int = 0
    n_max: int = 6
    phase_seed: int = 0
    phases: tuple[float, ...] | None = None

    def __post_init__(self):
        if not 1.0 < self.fractal_dimension < 2.0:
            raise ParameterError(
                f"fractal_dimension must lie in (1, 2), got {self.fractal_dimension}"
            )
        if self.gamma <= 1.0:
            raise ParameterError(f"gamma must exceed 1, got {self.gamma}")
        if self.n_max < self.n_min:
            raise ParameterError(
                f"n_max ({self.n_max}) must be >= n_min ({self.n_min})"
            )
        if self.phases is not None:
            n_modes = self.n_max - self.n_min + 1
            if len(self.phases) != n_modes:
                raise ParameterError(
                    f"expected {n_modes} phases, got {len(self.phases)}"
                )

    @property
    def modes(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    def mode_phases(self) -> np.ndarray:
        """Per-mode phases, explicit or drawn per (seed, mode)."""
        if self.phases is not None:
            return np.asarray(self.phases, dtype=np.float64)
        return np.array(
            [_phase_for_mode(self.phase_seed, int(n)) for n in self.modes]
        )


def _phase_for_mode(seed: int, n: int) -> float:
    # Philox keyed by (seed, mode): splittable, so each mode's phase is
    # independent of which other modes are requested.
    gen = np.random.Generator(np.random.Philox(key=[seed, n]))
    return gen.uniform(0.0, 2.0 * np.pi)


@dataclass(frozen=True)
class WallProfile:
    """Sampled elevation trace of one wall (lattice units)."""

    x_samples: np.ndarray
    elevations: np.ndarray
    side: Side

    def __post_init__(self):
        x = np.asarray(self.x_samples, dtype=np.float64)
        y = np.asarray(self.elevations, dtype=np.float64)
        if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise ParameterError("profile arrays must be equal-length 1-D, len >= 2")
        if not np.all(np.diff(x) > 0):
            raise ParameterError("x_samples must be strictly increasing")
        object.__setattr__(self, "x_samples", x)
        object.__setattr__(self, "elevations", y)


@dataclass(frozen=True)
class RoughnessStats:
    h_avg: float
    h_max: float
    h_min: float


def generate_wm_profile(
    spec: FractalSurfaceSpec, x_samples: np.ndarray, side: Side = Side.BOTTOM
) -> WallProfile:
    """Evaluate the fractal profile at the given streamwise positions.

    y(x) = A * sum_n gamma^(-n (D - 1)) * cos(2 pi gamma^n x + phi_n)
    """
    x = np.asarray(x_samples, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ParameterError("x_samples must be a nonempty 1-D array")
    if x.size > 1 and not np.all(np.diff(x) > 0):
        raise ParameterError("x_samples must be strictly increasing")

    n = spec.modes.astype(np.float64)
    phases = spec.mode_phases()
    decay = spec.gamma ** (-n * (spec.fractal_dimension - 1.0))
    freq = spec.gamma ** n
    # (modes, samples) -> sum over modes
    args = 2.0 * np.pi * freq[:, None] * x[None, :] + phases[:, None]
    y = spec.amplitude * np.sum(decay[:, None] * np.cos(args), axis=0)
    if x.size == 1:
        # WallProfile requires len >= 2; single-sample evaluation is still
        # useful in tests, so duplicate is not allowed -- raise instead.
        raise ParameterError("at least two samples are required for a profile")
    return WallProfile(x_samples=x, elevations=y, side=side)


def roughness_stats(profile: WallProfile) -> RoughnessStats:
    """Ra-style statistics relative to the profile mean."""
    y = profile.elevations
    dev = y - np.mean(y)
    return RoughnessStats(
        h_avg=float(np.mean(np.abs(dev))),
        h_max=float(np.max(dev)),
        h_min=float(np.min(dev)),
    )


def _round_half_up(values: np.ndarray) -> np.ndarray:
    return np.floor(values + 0.5).astype(np.int64)


def rasterize_walls(
    top: WallProfile,
    bottom: WallProfile,
    nx: int,
    ny: int,
    mean_gap: float,
) -> np.ndarray:
    """Boolean solid mask of shape (nx, ny).

    Wall baselines are offset so the mean fluid gap equals ``mean_gap``;
    elevations are rounded half-up to integer rows.  Rows 0 and ny-1 are
    always solid.  Raises GeometryError if any column keeps fewer than
    three fluid nodes.
    """
    if nx < 2 or ny < 5:
        raise ParameterError(f"lattice too small: nx={nx}, ny={ny}")
    if top.elevations.size != nx or bottom.elevations.size != nx:
        raise ParameterError("profiles must supply one elevation per column")

    offset = (ny - 1 - mean_gap) / 2.0
    bottom_rows = _round_half_up(offset + bottom.elevations)
    top_rows = _round_half_up(offset + top.elevations)

    mask = np.zeros((nx, ny), dtype=bool)
    j = np.arange(ny)
    mask |= j[None, :] <= np.maximum(bottom_rows, 0)[:, None]
    mask |= j[None, :] >= (ny - 1 - np.maximum(top_rows, 0))[:, None]

    fluid_per_column = ny - np.count_nonzero(mask, axis=1)
    bad = np.nonzero(fluid_per_column < 3)[0]
    if bad.size:
        raise GeometryError(
            f"channel pinch-off: column {int(bad[0])} has "
            f"{int(fluid_per_column[bad[0]])} fluid nodes (< 3)"
        )
    return mask
