"""Composite training objective: data, PDE-residual, boundary, and
moment-consistency terms, each with an exact parameter gradient.

Residuals are formed in non-dimensional variables; every derivative is
chain-ruled from network coordinates through the input/output
normalization records.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError, SingularDensityError
from ..lbm.lattice import CX, CY
from .model import N_MACRO, PinnModel
from .sampling import CollocationSet, LabeledDataset

RHO_FLOOR = 1e-6

_CXF = CX.astype(np.float64)
_CYF = CY.astype(np.float64)


@dataclass(frozen=True)
class LossWeights:
    data: float = 1.0
    physics: float = 0.8
    cont: float = 0.6
    bc: float = 1.2
    moment: float = 0.0

    def __post_init__(self):
        vals = (self.data, self.physics, self.cont, self.bc, self.moment)
        if any(w < 0 for w in vals):
            raise ParameterError("loss weights must be nonnegative")
        if all(w == 0 for w in vals):
            raise ParameterError("at least one loss weight must be positive")


class _Interior:
    """Denormalized fields and derivatives at interior collocation points."""

    def __init__(self, model: PinnModel, points_nd):
        self.model = model
        self.n = np.atleast_2d(points_nd).shape[0]
        self.tape = model.tape(points_nd, need_input_derivs=True)
        y, jac, hess = self.tape.y, self.tape.jac, self.tape.hess_diag
        os_, osh = model.out_scale, model.out_shift
        is_ = model.in_scale

        self.vals = y[:, :N_MACRO] * os_ + osh            # (n, 4): u v p rho
        self.rho = self.vals[:, 3]
        if np.any(self.rho <= RHO_FLOOR):
            k = int(np.argmax(self.rho <= RHO_FLOOR))
            raise SingularDensityError(
                f"predicted density {self.rho[k]:.3e} <= {RHO_FLOOR} "
                f"at collocation point {k}"
            )
        # first derivatives d(field)/d(x~, y~, t~): (n, 4, 3)
        self.d1 = jac[:, :N_MACRO, :3] * os_[None, :, None] / is_[None, None, :3]
        # diagonal second derivatives, same layout
        self.d2 = hess[:, :N_MACRO, :3] * os_[None, :, None] / is_[None, None, :3] ** 2
        self.kin = y[:, N_MACRO:] if model.kinetic_head else None

    def residuals(self):
        u, v = self.vals[:, 0], self.vals[:, 1]
        du, dv, dp = self.d1[:, 0], self.d1[:, 1], self.d1[:, 2]
        lap_u = self.d2[:, 0, 0] + self.d2[:, 0, 1]
        lap_v = self.d2[:, 1, 0] + self.d2[:, 1, 1]
        re = self.model.reynolds
        r_cont = du[:, 0] + dv[:, 1]
        r_mx = du[:, 2] + u * du[:, 0] + v * du[:, 1] \
            + dp[:, 0] / self.rho - lap_u / re
        r_my = dv[:, 2] + u * dv[:, 0] + v * dv[:, 1] \
            + dp[:, 1] / self.rho - lap_v / re
        return r_cont, r_mx, r_my

    def moment_errors(self):
        if self.kin is None:
            return None
        rho, u, v = self.rho, self.vals[:, 0], self.vals[:, 1]
        e0 = self.kin @ np.ones(9) - rho
        e1 = self.kin @ _CXF - rho * u
        e2 = self.kin @ _CYF - rho * v
        return e0, e1, e2

    def backprop_residual_adjoints(self, a_cont, a_mx, a_my,
                                   a_mom=None) -> np.ndarray:
        """Parameter gradient of sum(a_cont*R_cont + a_mx*R_mx + a_my*R_my)
        (+ moment-error terms when a_mom = (a0, a1, a2) is given)."""
        m = self.model
        os_, is_ = m.out_scale, m.in_scale
        re = m.reynolds
        u, v, rho = self.vals[:, 0], self.vals[:, 1], self.rho
        du, dv, dp = self.d1[:, 0], self.d1[:, 1], self.d1[:, 2]

        dout = m.net_spec.output_width
        n = self.n
        ybar = np.zeros((n, dout))
        jbar = np.zeros((n, dout, m.net_spec.input_width))
        hbar = np.zeros_like(jbar)

        inv_rho = 1.0 / rho
        # value channels
        ybar[:, 0] = (a_mx * du[:, 0] + a_my * dv[:, 0]) * os_[0]
        ybar[:, 1] = (a_mx * du[:, 1] + a_my * dv[:, 1]) * os_[1]
        ybar[:, 3] = -(a_mx * dp[:, 0] + a_my * dp[:, 1]) * inv_rho**2 * os_[3]
        # first-derivative channels
        jbar[:, 0, 0] = (a_cont + a_mx * u) * os_[0] / is_[0]
        jbar[:, 0, 1] = (a_mx * v) * os_[0] / is_[1]
        jbar[:, 0, 2] = a_mx * os_[0] / is_[2]
        jbar[:, 1, 0] = (a_my * u) * os_[1] / is_[0]
        jbar[:, 1, 1] = (a_cont + a_my * v) * os_[1] / is_[1]
        jbar[:, 1, 2] = a_my * os_[1] / is_[2]
        jbar[:, 2, 0] = (a_mx * inv_rho) * os_[2] / is_[0]
        jbar[:, 2, 1] = (a_my * inv_rho) * os_[2] / is_[1]
        # Laplacian channels
        hbar[:, 0, 0] = -(a_mx / re) * os_[0] / is_[0] ** 2
        hbar[:, 0, 1] = -(a_mx / re) * os_[0] / is_[1] ** 2
        hbar[:, 1, 0] = -(a_my / re) * os_[1] / is_[0] ** 2
        hbar[:, 1, 1] = -(a_my / re) * os_[1] / is_[1] ** 2

        if a_mom is not None and self.kin is not None:
            a0, a1, a2 = a_mom
            ybar[:, N_MACRO:] += (a0[:, None] + np.outer(a1, _CXF)
                                  + np.outer(a2, _CYF))
            ybar[:, 3] += -(a0 + a1 * u + a2 * v) * os_[3]
            ybar[:, 0] += -(a1 * rho) * os_[0]
            ybar[:, 1] += -(a2 * rho) * os_[1]

        return self.tape.backprop(ybar, jbar, hbar)


def pde_residuals(model: PinnModel, points_nd):
    """(R_cont, R_mom_x, R_mom_y) at the given non-dim points."""
    pts = np.atleast_2d(np.asarray(points_nd, dtype=np.float64))
    interior = _Interior(model, pts)
    r = interior.residuals()
    if np.asarray(points_nd).ndim == 1:
        return tuple(float(x[0]) for x in r)
    return r


def data_loss(model: PinnModel, dataset: LabeledDataset,
              _grad=False, _idx=None):
    """Mean squared misfit of (u, v, p, rho) in normalized output space."""
    if len(dataset) == 0:
        raise ParameterError("dataset must be nonempty")
    pts = dataset.points if _idx is None else dataset.points[_idx]
    lab = dataset.labels if _idx is None else dataset.labels[_idx]
    tape = model.tape(pts)
    yn = tape.y[:, :N_MACRO]
    ln = (lab - model.out_shift) / model.out_scale
    diff = yn - ln
    value = float(np.mean(np.sum(diff**2, axis=1)))
    if not _grad:
        return value
    ybar = np.zeros((pts.shape[0], model.net_spec.output_width))
    ybar[:, :N_MACRO] = 2.0 * diff / pts.shape[0]
    return value, tape.backprop(ybar)


def physics_loss(model: PinnModel, collocation: CollocationSet) -> float:
    """Bundled PDE-residual plus moment-consistency mean square."""
    if collocation.interior.shape[0] == 0:
        raise ParameterError("collocation set must be nonempty")
    interior = _Interior(model, collocation.interior)
    r_cont, r_mx, r_my = interior.residuals()
    value = float(np.mean(r_cont**2 + r_mx**2 + r_my**2))
    mom = interior.moment_errors()
    if mom is not None:
        value += float(np.mean(mom[0]**2 + mom[1]**2 + mom[2]**2))
    return value


def boundary_loss(model: PinnModel, collocation: CollocationSet,
                  outlet_pressure_nd: float = 0.0,
                  _grad=False):
    """Mean squared boundary-condition violation over all tagged points."""
    items = list(collocation.boundary_items())
    if not items:
        raise ParameterError("no boundary points supplied")
    for kind, _, _ in items:
        if kind not in ("wall", "inlet", "outlet", "initial"):
            raise ParameterError(f"unknown boundary kind {kind!r}")

    total = 0.0
    count = 0
    tapes = []
    for kind, pts, labels in items:
        tape = model.tape(pts)
        vals = tape.y[:, :N_MACRO] * model.out_scale + model.out_shift
        n = pts.shape[0]
        resid = np.zeros((n, N_MACRO))  # per-channel violation
        if kind == "wall":
            resid[:, 0] = vals[:, 0]
            resid[:, 1] = vals[:, 1]
        elif kind == "inlet":
            resid[:, 0] = vals[:, 0] - 1.0
            resid[:, 1] = vals[:, 1]
        elif kind == "outlet":
            resid[:, 2] = vals[:, 2] - outlet_pressure_nd
        else:  # initial
            if labels is None:
                raise ParameterError("initial points require labels")
            resid = vals - labels
        total += float(np.sum(resid**2))
        count += n
        tapes.append((tape, resid, n))

    value = total / count
    if not _grad:
        return value
    grad = None
    for tape, resid, n in tapes:
        ybar = np.zeros((n, model.net_spec.output_width))
        ybar[:, :N_MACRO] = 2.0 * resid * model.out_scale / count
        g = tape.backprop(ybar)
        grad = g if grad is None else grad + g
    return value, grad


def total_loss(model: PinnModel, dataset, collocation, weights: LossWeights,
               outlet_pressure_nd: float = 0.0):
    """Weighted composite loss; returns (scalar, per-term breakdown)."""
    value, breakdown, _ = _total(model, dataset, collocation, weights,
                                 outlet_pressure_nd, grad=False)
    return value, breakdown


def total_loss_and_grad(model: PinnModel, dataset, collocation,
                        weights: LossWeights,
                        outlet_pressure_nd: float = 0.0,
                        data_idx=None, colloc_idx=None):
    """Composite loss with its exact parameter gradient (flat vector)."""
    return _total(model, dataset, collocation, weights, outlet_pressure_nd,
                  grad=True, data_idx=data_idx, colloc_idx=colloc_idx)


def _total(model, dataset, collocation, weights, outlet_pressure_nd,
           grad, data_idx=None, colloc_idx=None):
    breakdown = {"data": 0.0, "mom": 0.0, "cont": 0.0, "bc": 0.0,
                 "moment": 0.0}
    grad_total = np.zeros(model.params.size) if grad else None

    if dataset is not None and len(dataset) and weights.data > 0:
        if grad:
            val, g = data_loss(model, dataset, _grad=True, _idx=data_idx)
            grad_total += weights.data * g
        else:
            val = data_loss(model, dataset, _idx=data_idx)
        breakdown["data"] = val

    interior_pts = None
    if collocation is not None and collocation.interior.shape[0]:
        interior_pts = (collocation.interior if colloc_idx is None
                        else collocation.interior[colloc_idx])
    need_physics = (weights.physics > 0 or weights.cont > 0
                    or (weights.moment > 0 and model.kinetic_head))
    if interior_pts is not None and need_physics:
        interior = _Interior(model, interior_pts)
        r_cont, r_mx, r_my = interior.residuals()
        n = interior.n
        breakdown["cont"] = float(np.mean(r_cont**2))
        breakdown["mom"] = float(np.mean(r_mx**2 + r_my**2))
        mom_err = interior.moment_errors() if weights.moment > 0 else None
        if mom_err is not None:
            breakdown["moment"] = float(
                np.mean(mom_err[0]**2 + mom_err[1]**2 + mom_err[2]**2))
        if grad:
            a_cont = 2.0 * weights.cont * r_cont / n
            a_mx = 2.0 * weights.physics * r_mx / n
            a_my = 2.0 * weights.physics * r_my / n
            a_mom = None
            if mom_err is not None:
                a_mom = tuple(2.0 * weights.moment * e / n for e in mom_err)
            grad_total += interior.backprop_residual_adjoints(
                a_cont, a_mx, a_my, a_mom)

    if (collocation is not None and weights.bc > 0
            and any(True for _ in collocation.boundary_items())):
        if grad:
            val, g = boundary_loss(model, collocation, outlet_pressure_nd,
                                   _grad=True)
            grad_total += weights.bc * g
        else:
            val = boundary_loss(model, collocation, outlet_pressure_nd)
        breakdown["bc"] = val

    value = (weights.data * breakdown["data"]
             + weights.physics * breakdown["mom"]
             + weights.cont * breakdown["cont"]
             + weights.bc * breakdown["bc"]
             + weights.moment * breakdown["moment"])
    return value, breakdown, grad_total
