"""Pure-numpy reference implementation of the D2Q9 update step.

The numba kernels in kernels_numba.py mirror this arithmetic; the active
implementation is chosen in backend.py.
"""

from __future__ import annotations

import numpy as np

from .lattice import CX, CY, OPP, equilibrium_field


def moments(f, solid):
    """Density and velocity from populations; u = v = 0 on solid nodes."""
    rho = f.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ux = (f[1] + f[5] + f[8] - f[3] - f[6] - f[7]) / rho
        uy = (f[2] + f[5] + f[6] - f[4] - f[7] - f[8]) / rho
    ux[solid] = 0.0
    uy[solid] = 0.0
    return rho, ux, uy


def zou_he_inlet(f, solid, inlet_u):
    """Velocity inlet at column 0: set (u, v) = (inlet_u, 0) on fluid rows."""
    fl = ~solid[0]
    f0, f2, f3, f4, f6, f7 = (f[i][0][fl] for i in (0, 2, 3, 4, 6, 7))
    rho = (f0 + f2 + f4 + 2.0 * (f3 + f6 + f7)) / (1.0 - inlet_u)
    ru = rho * inlet_u
    f[1][0][fl] = f3 + (2.0 / 3.0) * ru
    f[5][0][fl] = f7 - 0.5 * (f2 - f4) + ru / 6.0
    f[8][0][fl] = f6 + 0.5 * (f2 - f4) + ru / 6.0


def zou_he_outlet(f, solid, outlet_rho):
    """Pressure outlet at the last column: set rho = outlet_rho, v = 0."""
    fl = ~solid[-1]
    f0, f1, f2, f4, f5, f8 = (f[i][-1][fl] for i in (0, 1, 2, 4, 5, 8))
    ux = -1.0 + (f0 + f2 + f4 + 2.0 * (f1 + f5 + f8)) / outlet_rho
    ru = outlet_rho * ux
    f[3][-1][fl] = f1 - (2.0 / 3.0) * ru
    f[7][-1][fl] = f5 + 0.5 * (f2 - f4) - ru / 6.0
    f[6][-1][fl] = f8 - 0.5 * (f2 - f4) - ru / 6.0


def step(f, solid, tau, inlet_u, outlet_rho, periodic_x):
    """One BGK collide-stream-boundary update; returns new populations."""
    rho, ux, uy = moments(f, solid)
    feq = equilibrium_field(rho, ux, uy)
    fpost = f + (feq - f) / tau
    fpost[:, solid] = f[:, solid]  # solid nodes do not collide

    fnew = np.empty_like(f)
    for i in range(9):
        fnew[i] = np.roll(fpost[i], (CX[i], CY[i]), axis=(0, 1))

    # full-way bounce-back: reverse everything that landed on a solid node
    fnew[:, solid] = fnew[OPP][:, solid]

    if not periodic_x:
        zou_he_inlet(fnew, solid, inlet_u)
        zou_he_outlet(fnew, solid, outlet_rho)
    return fnew
