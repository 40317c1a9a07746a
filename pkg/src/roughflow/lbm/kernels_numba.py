"""Numba-compiled D2Q9 update step.

Arithmetic mirrors kernels_numpy.step; collision and streaming are fused
into a single pass over the grid with a double buffer.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .lattice import CS2, CX, CY, OPP, W

_CX = CX.copy()
_CY = CY.copy()
_OPP = OPP.copy()
_W = W.copy()


@njit(cache=True)
def _collide_stream(f, fnew, solid, tau):
    nx, ny = solid.shape
    inv_tau = 1.0 / tau
    for x in range(nx):
        for y in range(ny):
            if solid[x, y]:
                for i in range(9):
                    xn = (x + _CX[i]) % nx
                    yn = (y + _CY[i]) % ny
                    fnew[i, xn, yn] = f[i, x, y]
                continue
            rho = 0.0
            for i in range(9):
                rho += f[i, x, y]
            ux = (f[1, x, y] + f[5, x, y] + f[8, x, y]
                  - f[3, x, y] - f[6, x, y] - f[7, x, y]) / rho
            uy = (f[2, x, y] + f[5, x, y] + f[6, x, y]
                  - f[4, x, y] - f[7, x, y] - f[8, x, y]) / rho
            usq = ux * ux + uy * uy
            for i in range(9):
                cu = _CX[i] * ux + _CY[i] * uy
                feq = _W[i] * rho * (1.0 + cu / CS2 + cu * cu / (2.0 * CS2 * CS2)
                                     - usq / (2.0 * CS2))
                val = f[i, x, y] + (feq - f[i, x, y]) * inv_tau
                xn = (x + _CX[i]) % nx
                yn = (y + _CY[i]) % ny
                fnew[i, xn, yn] = val


@njit(cache=True)
def _bounce_back(fnew, solid):
    nx, ny = solid.shape
    tmp = np.empty(9)
    for x in range(nx):
        for y in range(ny):
            if solid[x, y]:
                for i in range(9):
                    tmp[i] = fnew[_OPP[i], x, y]
                for i in range(9):
                    fnew[i, x, y] = tmp[i]


@njit(cache=True)
def _zou_he(fnew, solid, inlet_u, outlet_rho):
    nx, ny = solid.shape
    for y in range(ny):
        if not solid[0, y]:
            rho = (fnew[0, 0, y] + fnew[2, 0, y] + fnew[4, 0, y]
                   + 2.0 * (fnew[3, 0, y] + fnew[6, 0, y] + fnew[7, 0, y])) \
                  / (1.0 - inlet_u)
            ru = rho * inlet_u
            d24 = fnew[2, 0, y] - fnew[4, 0, y]
            fnew[1, 0, y] = fnew[3, 0, y] + (2.0 / 3.0) * ru
            fnew[5, 0, y] = fnew[7, 0, y] - 0.5 * d24 + ru / 6.0
            fnew[8, 0, y] = fnew[6, 0, y] + 0.5 * d24 + ru / 6.0
        if not solid[nx - 1, y]:
            ux = -1.0 + (fnew[0, nx - 1, y] + fnew[2, nx - 1, y]
                         + fnew[4, nx - 1, y]
                         + 2.0 * (fnew[1, nx - 1, y] + fnew[5, nx - 1, y]
                                  + fnew[8, nx - 1, y])) / outlet_rho
            ru = outlet_rho * ux
            d24 = fnew[2, nx - 1, y] - fnew[4, nx - 1, y]
            fnew[3, nx - 1, y] = fnew[1, nx - 1, y] - (2.0 / 3.0) * ru
            fnew[7, nx - 1, y] = fnew[5, nx - 1, y] + 0.5 * d24 - ru / 6.0
            fnew[6, nx - 1, y] = fnew[8, nx - 1, y] - 0.5 * d24 - ru / 6.0


def step(f, solid, tau, inlet_u, outlet_rho, periodic_x):
    """One BGK collide-stream-boundary update; returns new populations."""
    fnew = np.empty_like(f)
    _collide_stream(f, fnew, solid, tau)
    _bounce_back(fnew, solid)
    if not periodic_x:
        _zou_he(fnew, solid, inlet_u, outlet_rho)
    return fnew
