from .lattice import (
    C,
    CS2,
    CX,
    CY,
    OPP,
    W,
    FlowParams,
    LatticeSpec,
    equilibrium,
    equilibrium_field,
    pressure_from_density,
    tau_from_viscosity,
    viscosity_from_tau,
)
from .solver import (
    FieldSnapshot,
    LbmState,
    Schedule,
    apply_inlet_velocity,
    apply_outlet_pressure,
    collide_and_stream,
    initial_state,
    run_simulation,
)

__all__ = [
    "C", "CS2", "CX", "CY", "OPP", "W",
    "FlowParams", "LatticeSpec",
    "equilibrium", "equilibrium_field", "pressure_from_density",
    "tau_from_viscosity", "viscosity_from_tau",
    "FieldSnapshot", "LbmState", "Schedule",
    "apply_inlet_velocity", "apply_outlet_pressure",
    "collide_and_stream", "initial_state", "run_simulation",
]
