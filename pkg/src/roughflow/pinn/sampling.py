"""Collocation-point and labeled-dataset construction.

Interior points are rejection-sampled against the solid mask inflated by
one lattice unit; the near-wall-enriched strategy places a configurable
fraction (default 40%) inside the y < 0.2 H wall bands and the rest in the
remaining fluid.  All sampling is deterministic per seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..errors import GeometryError, ParameterError
from .model import FlowDomain

BOUNDARY_KINDS = ("wall", "inlet", "outlet", "initial")
STRATEGIES = ("uniform", "near_wall_enriched")
BAND_GAP_FRACTION = 0.2  # wall band: distance < 0.2 H
MIN_CLEARANCE = 1.0      # lattice units kept clear of any solid node


@dataclass(frozen=True)
class CollocationSet:
    """Sampled training points in non-dimensional model coordinates."""

    interior: np.ndarray                  # (n, 3): (x~, y~, t~)
    boundary: dict                        # kind -> (m, 3) points
    boundary_labels: dict = field(default_factory=dict)  # kind -> labels
    strategy: str = "uniform"
    seed: int = 0

    def boundary_items(self):
        for kind in BOUNDARY_KINDS:
            pts = self.boundary.get(kind)
            if pts is not None and len(pts):
                yield kind, pts, self.boundary_labels.get(kind)


@dataclass(frozen=True)
class LabeledDataset:
    """Labeled samples (x~, y~, t~) -> (u~, v~, p~, rho) with provenance."""

    points: np.ndarray   # (n, 3)
    labels: np.ndarray   # (n, 4)
    provenance: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        lab = np.asarray(self.labels, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or lab.shape != (pts.shape[0], 4):
            raise ParameterError("dataset arrays have inconsistent shapes")
        if not np.all(np.isfinite(lab)):
            raise ParameterError("labels must be finite (no solid-node samples)")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", lab)

    def __len__(self):
        return self.points.shape[0]


def _fluid_distance(mask):
    """Distance (lu) from each node to the nearest solid node."""
    return ndimage.distance_transform_edt(~mask)


def _sample_region(rng, domain, accept_fn, count, label):
    """Rejection-sample `count` lattice-coordinate space-time points."""
    nx, ny = domain.nx, domain.ny
    t0, t1 = domain.time_window
    out = np.empty((count, 3))
    filled = 0
    attempts = 0
    chunk = max(4 * count, 256)
    while filled < count:
        xs = rng.uniform(0.0, nx - 1.0, chunk)
        ys = rng.uniform(0.0, ny - 1.0, chunk)
        ts = rng.uniform(t0, t1, chunk) if t1 > t0 else np.full(chunk, float(t0))
        keep = accept_fn(xs, ys)
        attempts += chunk
        taken = min(int(keep.sum()), count - filled)
        idx = np.nonzero(keep)[0][:taken]
        out[filled:filled + taken, 0] = xs[idx]
        out[filled:filled + taken, 1] = ys[idx]
        out[filled:filled + taken, 2] = ts[idx]
        filled += taken
        if attempts >= 100 * count and filled < 0.01 * attempts:
            raise GeometryError(
                f"rejection acceptance below 1% while sampling {label} points"
            )
    return out


def _to_model(domain, pts_lattice):
    xs, ys, ts = domain.to_model_coords(
        pts_lattice[:, 0], pts_lattice[:, 1], pts_lattice[:, 2])
    return np.stack([xs, ys, ts], axis=1)


def sample_collocation(
    domain: FlowDomain,
    strategy: str,
    n_points: int,
    seed: int,
    band_fraction: float = 0.4,
) -> CollocationSet:
    """Sample interior collocation points with the requested strategy."""
    if strategy not in STRATEGIES:
        raise ParameterError(f"strategy must be one of {STRATEGIES}")
    if n_points <= 0:
        raise ParameterError("point count must be positive")
    if not 0.0 < band_fraction < 1.0:
        raise ParameterError("band fraction must lie in (0, 1)")

    rng = np.random.default_rng(seed)
    dist = _fluid_distance(domain.mask)
    band_width = BAND_GAP_FRACTION * domain.gap

    def at(xs, ys):
        return dist[np.clip(np.rint(xs).astype(int), 0, domain.nx - 1),
                    np.clip(np.rint(ys).astype(int), 0, domain.ny - 1)]

    def clear(xs, ys):
        return at(xs, ys) >= MIN_CLEARANCE

    if strategy == "uniform":
        pts = _sample_region(rng, domain, clear, n_points, "interior")
    else:
        n_interior = int(np.floor((1.0 - band_fraction) * n_points + 0.5))
        n_band = n_points - n_interior

        def in_band(xs, ys):
            d = at(xs, ys)
            return (d >= MIN_CLEARANCE) & (d < band_width)

        def off_band(xs, ys):
            return at(xs, ys) >= max(band_width, MIN_CLEARANCE)

        pts = np.vstack([
            _sample_region(rng, domain, off_band, n_interior, "interior"),
            _sample_region(rng, domain, in_band, n_band, "near-wall band"),
        ])

    return CollocationSet(
        interior=_to_model(domain, pts),
        boundary={},
        strategy=strategy,
        seed=seed,
    )


def sample_boundary(
    domain: FlowDomain,
    n_per_kind: int,
    seed: int,
    initial_snapshot=None,
) -> dict:
    """Boundary collocation: wall, inlet, outlet, and optional initial points.

    Returns (boundary_points, boundary_labels) in model coordinates;
    initial-condition labels are taken from the given snapshot.
    """
    rng = np.random.default_rng(seed)
    dist = _fluid_distance(domain.mask)
    t0, t1 = domain.time_window
    boundary = {}
    labels = {}

    # wall: first fluid layer adjacent to solid nodes
    wall_nodes = np.argwhere((dist >= 0.5) & (dist < 1.5))
    if wall_nodes.size == 0:
        raise GeometryError("no wall-adjacent fluid nodes")
    pick = rng.integers(0, len(wall_nodes), n_per_kind)
    ts = rng.uniform(t0, t1, n_per_kind) if t1 > t0 else np.full(n_per_kind, float(t0))
    pts = np.column_stack([wall_nodes[pick, 0].astype(float),
                           wall_nodes[pick, 1].astype(float), ts])
    boundary["wall"] = _to_model(domain, pts)

    for kind, col in (("inlet", 0), ("outlet", domain.nx - 1)):
        rows = np.nonzero(~domain.mask[col])[0]
        if rows.size == 0:
            raise GeometryError(f"no fluid nodes on the {kind} column")
        ys = rng.uniform(rows.min(), rows.max(), n_per_kind)
        ts = rng.uniform(t0, t1, n_per_kind) if t1 > t0 else np.full(n_per_kind, float(t0))
        pts = np.column_stack([np.full(n_per_kind, float(col)), ys, ts])
        boundary[kind] = _to_model(domain, pts)

    if initial_snapshot is not None:
        fluid_nodes = np.argwhere(~domain.mask & (dist >= MIN_CLEARANCE))
        pick = rng.integers(0, len(fluid_nodes), n_per_kind)
        xi, yi = fluid_nodes[pick, 0], fluid_nodes[pick, 1]
        pts = np.column_stack([xi.astype(float), yi.astype(float),
                               np.full(n_per_kind, float(initial_snapshot.t))])
        boundary["initial"] = _to_model(domain, pts)
        labels["initial"] = np.column_stack([
            domain.velocity_to_model(initial_snapshot.u[xi, yi]),
            domain.velocity_to_model(initial_snapshot.v[xi, yi]),
            domain.pressure_to_model(initial_snapshot.p[xi, yi]),
            initial_snapshot.rho[xi, yi],
        ])

    return boundary, labels


def dataset_from_snapshots(
    domain: FlowDomain,
    snapshots,
    max_points: int,
    seed: int,
    provenance: str = "",
) -> LabeledDataset:
    """Subsample fluid nodes of the given snapshots into a labeled dataset."""
    if not snapshots:
        raise ParameterError("at least one snapshot is required")
    rng = np.random.default_rng(seed)
    dist = _fluid_distance(domain.mask)
    fluid_nodes = np.argwhere(~domain.mask & (dist >= MIN_CLEARANCE))
    per_snap = max(1, max_points // len(snapshots))

    pts_parts, lab_parts = [], []
    for snap in snapshots:
        pick = rng.choice(len(fluid_nodes), size=min(per_snap, len(fluid_nodes)),
                          replace=False)
        xi, yi = fluid_nodes[pick, 0], fluid_nodes[pick, 1]
        pts = np.column_stack([xi.astype(float), yi.astype(float),
                               np.full(len(pick), float(snap.t))])
        pts_parts.append(_to_model(domain, pts))
        lab_parts.append(np.column_stack([
            domain.velocity_to_model(snap.u[xi, yi]),
            domain.velocity_to_model(snap.v[xi, yi]),
            domain.pressure_to_model(snap.p[xi, yi]),
            snap.rho[xi, yi],
        ]))
    return LabeledDataset(
        points=np.vstack(pts_parts),
        labels=np.vstack(lab_parts),
        provenance=provenance,
    )
