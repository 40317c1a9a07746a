"""Error metrics and derived physical diagnostics for field comparison.

All metrics exclude NaN (solid) entries pairwise.  Finite-difference
operators are second-order central in the interior with one-sided stencils
at fluid-solid interfaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, UndefinedMetricError


def _paired(y, y_ref):
    y = np.asarray(y, dtype=np.float64).ravel()
    y_ref = np.asarray(y_ref, dtype=np.float64).ravel()
    if y.shape != y_ref.shape or y.size == 0:
        raise ParameterError("inputs must be equal-length and nonempty")
    keep = ~(np.isnan(y) | np.isnan(y_ref))
    y, y_ref = y[keep], y_ref[keep]
    if y.size == 0:
        raise ParameterError("no overlapping finite entries")
    return y, y_ref


def mae(y, y_ref) -> float:
    y, y_ref = _paired(y, y_ref)
    return float(np.mean(np.abs(y - y_ref)))


def rmse(y, y_ref) -> float:
    y, y_ref = _paired(y, y_ref)
    return float(np.sqrt(np.mean((y - y_ref) ** 2)))


def rel_l2(y, y_ref) -> float:
    y, y_ref = _paired(y, y_ref)
    denom = np.linalg.norm(y_ref)
    if denom == 0.0:
        raise UndefinedMetricError("relative L2 undefined for zero-norm reference")
    return float(np.linalg.norm(y - y_ref) / denom)


def r2(y, y_ref) -> float:
    y, y_ref = _paired(y, y_ref)
    ss_tot = np.sum((y_ref - np.mean(y_ref)) ** 2)
    if ss_tot == 0.0:
        raise UndefinedMetricError("R^2 undefined for constant reference")
    return float(1.0 - np.sum((y - y_ref) ** 2) / ss_tot)


def _central_gradient(field_vals, axis):
    """d(field)/d(axis coordinate), spacing 1, NaN-aware.

    Central differences where both neighbours are finite, one-sided where
    only one is, NaN where neither is or the node itself is NaN.
    """
    f = np.asarray(field_vals, dtype=np.float64)
    fp = np.full_like(f, np.nan)
    fm = np.full_like(f, np.nan)
    sl_all = [slice(None)] * f.ndim

    sl_to = sl_all.copy(); sl_to[axis] = slice(None, -1)
    sl_from = sl_all.copy(); sl_from[axis] = slice(1, None)
    fp[tuple(sl_to)] = f[tuple(sl_from)]      # neighbour at +1
    fm[tuple(sl_from)] = f[tuple(sl_to)]      # neighbour at -1

    ok_p = np.isfinite(fp)
    ok_m = np.isfinite(fm)
    out = np.full_like(f, np.nan)
    both = ok_p & ok_m
    out[both] = 0.5 * (fp[both] - fm[both])
    only_p = ok_p & ~ok_m
    out[only_p] = fp[only_p] - f[only_p]
    only_m = ok_m & ~ok_p
    out[only_m] = f[only_m] - fm[only_m]
    out[~np.isfinite(f)] = np.nan
    return out


def vorticity(snapshot) -> np.ndarray:
    """omega = dv/dx - du/dy on fluid nodes, NaN on solid nodes."""
    return _central_gradient(snapshot.v, 0) - _central_gradient(snapshot.u, 1)


def continuity_residual_field(snapshot):
    """du/dx + dv/dy; returns (field, mean |.|, max |.|) over fluid nodes."""
    res = _central_gradient(snapshot.u, 0) + _central_gradient(snapshot.v, 1)
    finite = res[np.isfinite(res)]
    return res, float(np.mean(np.abs(finite))), float(np.max(np.abs(finite)))


def enstrophy_deviation(pred_omega, ref_omega) -> float:
    """|int w_pred^2 - int w_ref^2| / int w_ref^2 over shared fluid nodes."""
    p, r = _paired(pred_omega, ref_omega)
    ref_enstrophy = np.sum(r * r)
    if ref_enstrophy == 0.0:
        raise UndefinedMetricError("zero reference enstrophy")
    return float(abs(np.sum(p * p) - ref_enstrophy) / ref_enstrophy)


def momentum_flux_deviation(pred, ref) -> float:
    """Relative deviation of sum(rho u^2) between two snapshots."""
    keep = ~(np.isnan(pred.u) | np.isnan(ref.u))
    flux_ref = np.sum(ref.rho[keep] * ref.u[keep] ** 2)
    if flux_ref == 0.0:
        raise UndefinedMetricError("zero reference momentum flux")
    flux_pred = np.sum(pred.rho[keep] * pred.u[keep] ** 2)
    return float(abs(flux_pred - flux_ref) / abs(flux_ref))


def _local_extrema(mag, floor):
    """Indices of strict local maxima of |field| above the floor (3x3)."""
    nx, ny = mag.shape
    hits = []
    for i in range(nx):
        for j in range(ny):
            v = mag[i, j]
            if not np.isfinite(v) or v < floor:
                continue
            neigh = mag[max(i - 1, 0):i + 2, max(j - 1, 0):j + 2]
            neigh = neigh[np.isfinite(neigh)]
            if v >= np.max(neigh):
                hits.append((i, j))
    return hits


def extrema_match_rate(pred_omega, ref_omega, tolerance,
                       magnitude_floor=6e-3) -> float:
    """Fraction of reference |omega| extrema matched by the prediction.

    An extremum at (i, j) is matched if the predicted extremum within the
    3x3 neighbourhood (the max-magnitude predicted value, absorbing one
    cell of localization jitter) agrees with the reference extremum within
    +-tolerance relative.
    """
    if tolerance <= 0:
        raise ParameterError("tolerance must be positive")
    ref = np.asarray(ref_omega, dtype=np.float64)
    pred = np.asarray(pred_omega, dtype=np.float64)
    if ref.shape != pred.shape:
        raise ParameterError("fields must share a grid")
    extrema = _local_extrema(np.abs(ref), magnitude_floor)
    if not extrema:
        raise UndefinedMetricError(
            f"no reference extrema above magnitude floor {magnitude_floor}"
        )
    matched = 0
    for i, j in extrema:
        target = ref[i, j]
        window = pred[max(i - 1, 0):i + 2, max(j - 1, 0):j + 2]
        window = window[np.isfinite(window)]
        if window.size == 0:
            continue
        candidate = window[np.argmax(np.abs(window))]
        if abs(candidate - target) <= tolerance * abs(target):
            matched += 1
    return matched / len(extrema)


def extract_profile(snapshot, axis: str, position: int, field_name: str = "u"):
    """1-D profile of one field at fixed x (axis='x') or fixed y (axis='y').

    Returns (coordinates, values) with solid nodes omitted.
    """
    data = getattr(snapshot, field_name)
    nx, ny = data.shape
    if axis == "x":
        if not 0 <= position < nx:
            raise ParameterError(f"x position {position} outside [0, {nx})")
        line = data[position, :]
    elif axis == "y":
        if not 0 <= position < ny:
            raise ParameterError(f"y position {position} outside [0, {ny})")
        line = data[:, position]
    else:
        raise ParameterError("axis must be 'x' or 'y'")
    coords = np.arange(line.size)
    keep = np.isfinite(line)
    return coords[keep], line[keep]


@dataclass
class MetricsReport:
    """Per-field error metrics plus conservation diagnostics."""

    fields: dict = field(default_factory=dict)  # name -> {metric: value}
    continuity_mean: float | None = None
    continuity_max: float | None = None
    momentum_flux_dev: float | None = None
    enstrophy_dev: float | None = None
    extrema_rate: float | None = None
    derivative_source: str = "finite_difference"

    def rows(self):
        """Flatten to (field, metric, value) rows for the report CSV."""
        out = []
        for name in sorted(self.fields):
            for metric in ("mae", "rmse", "rel_l2", "r2"):
                if metric in self.fields[name]:
                    out.append((name, metric, self.fields[name][metric]))
        diag = [
            ("global", "continuity_mean", self.continuity_mean),
            ("global", "continuity_max", self.continuity_max),
            ("global", "momentum_flux_dev", self.momentum_flux_dev),
            ("global", "enstrophy_dev", self.enstrophy_dev),
            ("global", "extrema_match_rate", self.extrema_rate),
        ]
        out.extend([r for r in diag if r[2] is not None])
        return out


def compare_snapshots(pred, ref, extrema_tolerance=0.15) -> MetricsReport:
    """Full report comparing a predicted snapshot against a reference."""
    report = MetricsReport()
    omega_pred = vorticity(pred)
    omega_ref = vorticity(ref)
    pairs = [("u", pred.u, ref.u), ("v", pred.v, ref.v),
             ("p", pred.p, ref.p), ("omega", omega_pred, omega_ref)]
    for name, yp, yr in pairs:
        entry = {"mae": mae(yp, yr), "rmse": rmse(yp, yr)}
        try:
            entry["rel_l2"] = rel_l2(yp, yr)
        except UndefinedMetricError:
            pass
        try:
            entry["r2"] = r2(yp, yr)
        except UndefinedMetricError:
            pass
        report.fields[name] = entry
    _, report.continuity_mean, report.continuity_max = \
        continuity_residual_field(pred)
    report.momentum_flux_dev = momentum_flux_deviation(pred, ref)
    try:
        report.enstrophy_dev = enstrophy_deviation(omega_pred, omega_ref)
    except UndefinedMetricError:
        pass
    try:
        report.extrema_rate = extrema_match_rate(
            omega_pred, omega_ref, extrema_tolerance)
    except UndefinedMetricError:
        pass
    return report
