"""D2Q9 lattice constants, parameter types, and the equilibrium distribution."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ParameterError

# Direction ordering: rest, +x, +y, -x, -y, then diagonals (+x+y), (-x+y),
# (-x-y), (+x-y).
CX = np.array([0, 1, 0, -1, 0, 1, -1, -1, 1], dtype=np.int64)
CY = np.array([0, 0, 1, 0, -1, 1, 1, -1, -1], dtype=np.int64)
C = np.stack([CX, CY], axis=1)
W = np.array(
    [4 / 9, 1 / 9, 1 / 9, 1 / 9, 1 / 9, 1 / 36, 1 / 36, 1 / 36, 1 / 36]
)
OPP = np.array([0, 3, 4, 1, 2, 7, 8, 5, 6], dtype=np.int64)
CS2 = 1.0 / 3.0  # lattice sound speed squared, dx = dt = 1


def tau_from_viscosity(nu: float) -> float:
    """Relaxation time for a given kinematic viscosity (dt = 1)."""
    if nu <= 0:
        raise ParameterError(f"kinematic viscosity must be positive, got {nu}")
    return nu / CS2 + 0.5


def viscosity_from_tau(tau: float) -> float:
    if tau <= 0.5:
        raise ParameterError(f"relaxation time must exceed 1/2, got {tau}")
    return CS2 * (tau - 0.5)


def pressure_from_density(rho):
    """Isothermal closure p = cs^2 * rho."""
    rho = np.asarray(rho, dtype=np.float64)
    if np.any(rho[np.isfinite(rho)] <= 0):
        raise ParameterError("density must be positive")
    return CS2 * rho


def equilibrium(rho: float, u) -> np.ndarray:
    """Second-order equilibrium populations for a single node."""
    if rho <= 0:
        raise ParameterError(f"density must be positive, got {rho}")
    ux, uy = float(u[0]), float(u[1])
    cu = CX * ux + CY * uy
    usq = ux * ux + uy * uy
    return W * rho * (1.0 + cu / CS2 + cu * cu / (2.0 * CS2**2) - usq / (2.0 * CS2))


def equilibrium_field(rho, ux, uy):
    """Equilibrium populations over a field; returns shape (9,) + rho.shape."""
    cu = CX[:, None, None] * ux[None] + CY[:, None, None] * uy[None]
    usq = ux * ux + uy * uy
    return W[:, None, None] * rho[None] * (
        1.0 + cu / CS2 + cu * cu / (2.0 * CS2**2) - usq[None] / (2.0 * CS2)
    )


@dataclass(frozen=True)
class LatticeSpec:
    """Grid geometry with solid mask; dx = dt = 1 lattice unit."""

    nx: int
    ny: int
    mask: np.ndarray  # (nx, ny) bool, True = solid

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != (self.nx, self.ny):
            raise ParameterError(
                f"mask shape {mask.shape} does not match ({self.nx}, {self.ny})"
            )
        object.__setattr__(self, "mask", mask)

    @property
    def fluid(self) -> np.ndarray:
        return ~self.mask


@dataclass(frozen=True)
class FlowParams:
    """Inlet/outlet conditions and transport coefficients, lattice units."""

    inlet_speed: float
    viscosity: float
    outlet_pressure: float = CS2  # i.e. outlet density 1
    body_force: tuple[float, float] = (0.0, 0.0)
    tau: float = field(init=False)

    def __post_init__(self):
        if self.viscosity <= 0:
            raise ParameterError("viscosity must be positive")
        if not 0 <= self.inlet_speed < 0.1:
            raise ParameterError(
                f"inlet speed {self.inlet_speed} outside the low-Mach range [0, 0.1)"
            )
        if self.body_force != (0.0, 0.0):
            raise ParameterError("body force is fixed at zero in this study")
        object.__setattr__(self, "tau", tau_from_viscosity(self.viscosity))

    @property
    def outlet_density(self) -> float:
        return self.outlet_pressure / CS2

    def reynolds(self, gap: float) -> float:
        return self.inlet_speed * gap / self.viscosity

    @classmethod
    def from_reynolds(cls, inlet_speed: float, reynolds: float, gap: float,
                      outlet_pressure: float = CS2) -> "FlowParams":
        if reynolds <= 0:
            raise ParameterError("Reynolds number must be positive")
        nu = inlet_speed * gap / reynolds
        return cls(inlet_speed=inlet_speed, viscosity=nu,
                   outlet_pressure=outlet_pressure)
