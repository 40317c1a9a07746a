"""Lattice Boltzmann simulation and physics-informed surrogate modeling of
unsteady flow in microchannels with fractal-rough walls."""

__version__ = "1.0.0"

from . import autodiff, datastore, errors, lbm, metrics, pinn, surface

__all__ = [
    "autodiff", "datastore", "errors", "lbm", "metrics", "pinn", "surface",
    "__version__",
]
