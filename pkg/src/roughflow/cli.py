"""Command-line pipeline driver.

Each subcommand runs one stage (surface, simulate, sample, train, evaluate)
or a parameter sweep, writes its artifact stamped with the config hash, and
skips work when an up-to-date artifact already exists (unless --force).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys

import numpy as np

from . import datastore as ds
from . import metrics
from .errors import ParameterError, RoughflowError
from .lbm import FlowParams, LatticeSpec, Schedule, run_simulation
from .pinn import (
    CollocationSet,
    FlowDomain,
    build_model,
    model_vorticity,
    predict_fields,
    sample_boundary,
    sample_collocation,
    dataset_from_snapshots,
    train,
)
from .surface import (Side, WallProfile, generate_wm_profile,
                      rasterize_walls, roughness_stats)

SWEEP_AXES = ("Re", "amplitude", "collocation_count", "activation",
              "learning_rate", "strategy")


# --------------------------------------------------------------------------
# Stage building blocks (also used directly by the test suite)
# --------------------------------------------------------------------------

def _entrance_ramp(nx: int) -> np.ndarray:
    """Smoothstep from 0 at the domain ends to 1 in the interior.

    The inlet and outlet columns must meet straight walls: the velocity and
    pressure closures there assume an uninterrupted boundary column, and
    roughness corners touching them destabilize the solver.
    """
    hold = max(2, nx // 50)          # fully smooth columns at each end
    margin = max(4, nx // 20)        # ramp length after the smooth section
    i = np.arange(nx, dtype=np.float64)
    d = np.minimum(i, nx - 1 - i)
    r = np.clip((d - hold) / margin, 0.0, 1.0)
    return r * r * (3.0 - 2.0 * r)


def build_geometry(config: ds.RunConfig):
    """Wall profiles (bottom seed, top seed+1) and the rasterized mask.

    Roughness is tapered to zero over a short entrance and exit section so
    the open boundaries sit in smooth channel segments.
    """
    xs = np.arange(config.nx, dtype=np.float64) / config.nx
    ramp = _entrance_ramp(config.nx)
    bottom = generate_wm_profile(config.surface_spec(0), xs, Side.BOTTOM)
    top = generate_wm_profile(config.surface_spec(1), xs, Side.TOP)
    bottom = WallProfile(bottom.x_samples, bottom.elevations * ramp,
                         Side.BOTTOM)
    top = WallProfile(top.x_samples, top.elevations * ramp, Side.TOP)
    mask = rasterize_walls(top, bottom, config.nx, config.ny, config.gap)
    return mask, top, bottom


def flow_params(config: ds.RunConfig) -> FlowParams:
    return FlowParams(inlet_speed=config.inlet_speed,
                      viscosity=config.viscosity,
                      outlet_pressure=config.outlet_pressure)


def simulate(config: ds.RunConfig):
    """Run the lattice solver; returns the list of snapshots."""
    mask, _, _ = build_geometry(config)
    spec = LatticeSpec(nx=config.nx, ny=config.ny, mask=mask)
    schedule = Schedule(total_steps=config.total_steps,
                        snapshot_interval=config.snapshot_interval)
    return list(run_simulation(spec, flow_params(config), schedule))


def split_snapshots(snapshots):
    """(training snapshots, held-out snapshot): the penultimate snapshot is
    held out so evaluation happens strictly inside the trained window."""
    if len(snapshots) < 2:
        raise ParameterError("need at least two snapshots to hold one out")
    holdout = snapshots[-2]
    rest = [s for i, s in enumerate(snapshots) if i != len(snapshots) - 2]
    return rest, holdout


def build_domain(config: ds.RunConfig, mask, snapshots) -> FlowDomain:
    return FlowDomain(
        mask=mask, gap=config.gap, inlet_speed=config.inlet_speed,
        time_window=(float(snapshots[0].t), float(snapshots[-1].t)),
        pressure_ref=config.outlet_pressure,
    )


def build_training_inputs(config: ds.RunConfig, domain, train_snaps):
    dataset = dataset_from_snapshots(domain, train_snaps,
                                     max_points=config.n_data,
                                     seed=config.seed, provenance="lbm")
    colloc = sample_collocation(domain, config.strategy,
                                config.n_collocation, seed=config.seed + 1,
                                band_fraction=config.band_fraction)
    boundary, blabels = sample_boundary(domain, config.n_boundary,
                                        seed=config.seed + 2,
                                        initial_snapshot=train_snaps[0])
    colloc = CollocationSet(interior=colloc.interior, boundary=boundary,
                            boundary_labels=blabels,
                            strategy=colloc.strategy, seed=colloc.seed)
    return dataset, colloc


def train_surrogate(config: ds.RunConfig, snapshots):
    """Full training stage on in-memory snapshots.

    Returns (model, history, info, domain, holdout snapshot).
    """
    train_snaps, holdout = split_snapshots(snapshots)
    mask = snapshots[0].solid
    domain = build_domain(config, mask, snapshots)
    dataset, colloc = build_training_inputs(config, domain, train_snaps)
    model = build_model(
        domain, reynolds=config.reynolds, labels=dataset.labels,
        hidden_layers=config.hidden_layers, hidden_width=config.hidden_width,
        activation=config.activation, init_seed=config.seed,
        kinetic_head=config.kinetic_head,
    )
    model, history, info = train(model, dataset, colloc,
                                 config.train_config())
    return model, history, info, domain, holdout


def evaluate_surrogate(model, domain, holdout):
    """Metric report of the surrogate against one reference snapshot."""
    pred = predict_fields(model, domain, holdout.t)
    return metrics.compare_snapshots(pred, holdout)


# --------------------------------------------------------------------------
# Artifact helpers
# --------------------------------------------------------------------------

def _read_csv_hash(path):
    try:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("# config_hash"):
                    return int(line.split("=", 1)[1].strip(), 0)
                if not line.startswith("#"):
                    break
    except (OSError, ValueError):
        return None
    return None


def _up_to_date(path, cfg_hash, force):
    return not force and os.path.exists(path) \
        and _read_csv_hash(path) == cfg_hash


def _write_csv(path, cfg_hash, header, rows, comments=()):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_hash = {cfg_hash:#018x}\n")
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _load_config(args) -> ds.RunConfig:
    with open(args.config, encoding="utf-8") as fh:
        config = ds.parse_config(fh.read())
    if getattr(args, "seed", None) is not None:
        config = dataclasses.replace(config, seed=args.seed)
    return config


def _read_manifest_snapshots(manifest_path, config):
    manifest = ds.read_manifest(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))
    snaps = []
    for rel in manifest.paths:
        snap, _ = ds.read_snapshot(os.path.join(base, rel),
                                   expect_shape=(config.nx, config.ny))
        snaps.append(snap)
    return manifest, snaps


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_surface(args) -> int:
    config = _load_config(args)
    cfg_hash = ds.config_hash(config)
    if _up_to_date(args.out, cfg_hash, args.force):
        print(f"surface: {args.out} up to date")
        return 0
    _, top, bottom = build_geometry(config)
    stats_t, stats_b = roughness_stats(top), roughness_stats(bottom)
    rows = zip(top.x_samples, bottom.elevations, top.elevations)
    _write_csv(args.out, cfg_hash, ("x", "bottom", "top"),
               ([repr(a), repr(b), repr(c)] for a, b, c in rows),
               comments=[
                   f"bottom: h_avg={stats_b.h_avg!r} h_max={stats_b.h_max!r} "
                   f"h_min={stats_b.h_min!r}",
                   f"top: h_avg={stats_t.h_avg!r} h_max={stats_t.h_max!r} "
                   f"h_min={stats_t.h_min!r}",
               ])
    print(f"surface: wrote {args.out}")
    return 0


def cmd_simulate(args) -> int:
    config = _load_config(args)
    cfg_hash = ds.config_hash(config)
    os.makedirs(args.out_dir, exist_ok=True)
    manifest_path = os.path.join(args.out_dir, "snapshots.manifest")
    if not args.force and os.path.exists(manifest_path):
        try:
            if ds.read_manifest(manifest_path).config_hash == cfg_hash:
                print(f"simulate: {manifest_path} up to date")
                return 0
        except RoughflowError:
            pass
    snapshots = simulate(config)
    names = []
    for snap in snapshots:
        name = f"snapshot_{snap.t:08d}.rfs"
        ds.write_snapshot(os.path.join(args.out_dir, name), snap, cfg_hash)
        names.append(name)
    ds.write_manifest(manifest_path, ds.Manifest(
        config_hash=cfg_hash, paths=tuple(names),
        extras={"stage": "simulate", "nx": config.nx, "ny": config.ny}))
    print(f"simulate: wrote {len(names)} snapshots to {args.out_dir}")
    return 0


def cmd_sample(args) -> int:
    config = _load_config(args)
    cfg_hash = ds.config_hash(config)
    if _up_to_date(args.out, cfg_hash, args.force):
        print(f"sample: {args.out} up to date")
        return 0
    mask, _, _ = build_geometry(config)
    t_end = (config.total_steps // config.snapshot_interval) \
        * config.snapshot_interval
    domain = FlowDomain(mask=mask, gap=config.gap,
                        inlet_speed=config.inlet_speed,
                        time_window=(0.0, float(t_end)),
                        pressure_ref=config.outlet_pressure)
    colloc = sample_collocation(domain, config.strategy,
                                config.n_collocation, seed=config.seed + 1,
                                band_fraction=config.band_fraction)
    boundary, _ = sample_boundary(domain, config.n_boundary,
                                  seed=config.seed + 2)
    rows = [("interior", repr(x), repr(y), repr(t))
            for x, y, t in colloc.interior]
    for kind, pts in boundary.items():
        rows.extend((kind, repr(x), repr(y), repr(t)) for x, y, t in pts)
    _write_csv(args.out, cfg_hash, ("kind", "x", "y", "t"), rows)
    print(f"sample: wrote {len(rows)} points to {args.out}")
    return 0


def cmd_train(args) -> int:
    config = _load_config(args)
    cfg_hash = ds.config_hash(config)
    if not args.force and os.path.exists(args.out):
        try:
            if ds.read_checkpoint(args.out)[3] == cfg_hash:
                print(f"train: {args.out} up to date")
                return 0
        except RoughflowError:
            pass
    manifest, snapshots = _read_manifest_snapshots(args.data, config)
    if manifest.config_hash != cfg_hash:
        print(f"warning: training data config hash "
              f"{manifest.config_hash:#018x} differs from "
              f"{cfg_hash:#018x}", file=sys.stderr)
    model, history, info, _, _ = train_surrogate(config, snapshots)
    ds.save_model(args.out, model, seed=config.seed, cfg_hash=cfg_hash)
    _write_csv(args.out + ".history.csv", cfg_hash,
               ("iter", "phase", "lr", "total", "data", "mom", "cont",
                "bc", "moment"),
               (row.astuple() for row in history),
               comments=[f"lbfgs_fallback_steps = {info['fallback_steps']}",
                         f"aborted = {info['aborted']}"])
    print(f"train: wrote {args.out} "
          f"(final loss {history[-1].total:.6g})" if history else
          f"train: wrote {args.out}")
    return 0


def _load_predictor(path):
    """A checkpoint (model) or a snapshot, distinguished by magic bytes."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == ds.SNAPSHOT_MAGIC:
        return ds.read_snapshot(path)  # (snapshot, hash)
    model, _, cfg_hash = ds.load_model(path)
    return model, cfg_hash


def cmd_evaluate(args) -> int:
    config = _load_config(args)
    cfg_hash = ds.config_hash(config)

    if args.pred is not None or args.ref is not None:
        if not (args.pred and args.ref and args.report):
            raise ParameterError(
                "snapshot comparison needs --pred, --ref, and --report")
        pred, _ = _load_predictor(args.pred)
        ref, _ = ds.read_snapshot(args.ref)
        if not hasattr(pred, "rho"):
            raise ParameterError("--pred must be a snapshot in this form")
        report = metrics.compare_snapshots(pred, ref)
        _write_csv(args.report, cfg_hash, ("field", "metric", "value"),
                   ((f, m, repr(v)) for f, m, v in report.rows()))
        print(f"evaluate: wrote {args.report}")
        return 0

    if args.model is None or args.data is None or args.out is None:
        raise ParameterError("evaluate needs --model, --data, and --out")
    if _up_to_date(args.out, cfg_hash, args.force):
        print(f"evaluate: {args.out} up to date")
        return 0
    model, _, model_hash = ds.load_model(args.model)
    if model_hash != cfg_hash:
        print(f"warning: model config hash {model_hash:#018x} differs "
              f"from {cfg_hash:#018x}", file=sys.stderr)
    _, snapshots = _read_manifest_snapshots(args.data, config)
    _, holdout = split_snapshots(snapshots)
    domain = build_domain(config, snapshots[0].solid, snapshots)
    report = evaluate_surrogate(model, domain, holdout)
    _write_csv(args.out, cfg_hash, ("field", "metric", "value"),
               ((f, m, repr(v)) for f, m, v in report.rows()),
               comments=[f"holdout_timestep = {holdout.t}"])
    print(f"evaluate: wrote {args.out}")
    return 0


# --------------------------------------------------------------------------
# Sweeps
# --------------------------------------------------------------------------

def _apply_axis(config: ds.RunConfig, axis: str, value: str) -> ds.RunConfig:
    if axis == "Re":
        re_val = float(value)
        if re_val <= 0:
            raise ParameterError("Re values must be positive")
        nu = config.inlet_speed * config.gap / re_val
        return dataclasses.replace(config, viscosity=nu)
    if axis == "amplitude":
        return dataclasses.replace(config, amplitude=float(value))
    if axis == "collocation_count":
        return dataclasses.replace(config, n_collocation=int(value))
    if axis == "activation":
        return dataclasses.replace(config, activation=value)
    if axis == "learning_rate":
        return dataclasses.replace(config, learning_rate=float(value))
    if axis == "strategy":
        return dataclasses.replace(config, strategy=value)
    raise ParameterError(f"sweep axis must be one of {SWEEP_AXES}")


SWEEP_METRIC_COLUMNS = (
    "omega_mae", "omega_rel_l2", "u_mae", "u_rel_l2", "v_mae", "p_mae",
    "continuity_mean", "momentum_flux_dev", "enstrophy_dev",
    "extrema_match_rate",
)


def run_sweep_leg(config: ds.RunConfig):
    """One pipeline leg: simulate, train, evaluate.  Returns a dict row."""
    snapshots = simulate(config)
    omega_max_lbm = float(np.nanmax(np.abs(
        metrics.vorticity(snapshots[-1]))))
    model, history, info, domain, holdout = train_surrogate(config, snapshots)
    report = evaluate_surrogate(model, domain, holdout)
    flat = {f"{field}_{name}": value for field, name, value in report.rows()}
    flat = {k.replace("global_", ""): v for k, v in flat.items()}
    row = {"omega_max_lbm": omega_max_lbm}
    last = history[-1]
    row.update(final_total=last.total, final_data=last.data,
               final_mom=last.mom, final_cont=last.cont, final_bc=last.bc,
               final_moment=last.moment)
    for col in SWEEP_METRIC_COLUMNS:
        row[col] = flat.get(col, float("nan"))
    return row


def cmd_sweep(args) -> int:
    config = _load_config(args)
    values = [v for v in args.values.split(",") if v]
    if not values:
        raise ParameterError("sweep needs a nonempty value list")
    if args.axis not in SWEEP_AXES:
        raise ParameterError(f"sweep axis must be one of {SWEEP_AXES}")
    os.makedirs(args.out_dir, exist_ok=True)

    columns = ["axis", "value", "error", "omega_max_lbm",
               "final_total", "final_data", "final_mom", "final_cont",
               "final_bc", "final_moment", *SWEEP_METRIC_COLUMNS]
    rows = []
    fit_points = []
    for value in values:
        row = {col: "" for col in columns}
        row["axis"], row["value"] = args.axis, value
        try:
            leg_config = _apply_axis(config, args.axis, value)
            result = run_sweep_leg(leg_config)
        except RoughflowError as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        else:
            row.update({k: repr(v) for k, v in result.items()})
            if args.axis == "amplitude":
                fit_points.append((float(value), result["omega_mae"]))
        rows.append([row[col] for col in columns])

    comments = []
    if args.axis == "amplitude" and len(fit_points) >= 2:
        h = np.array([p[0] for p in fit_points])
        mae = np.array([p[1] for p in fit_points])
        slope, intercept = np.polyfit(h, mae, 1)
        comments = [f"fit_slope = {slope!r}", f"fit_intercept = {intercept!r}"]

    out = os.path.join(args.out_dir, "sweep.csv")
    _write_csv(out, ds.config_hash(config), columns, rows, comments=comments)
    print(f"sweep: wrote {out} ({len(rows)} legs)")
    return 0


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roughflow",
        description="Rough-microchannel flow: lattice solver and "
                    "physics-informed surrogate pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=None, out_dir=False):
        p.add_argument("--config", required=True)
        p.add_argument("--force", action="store_true")
        p.add_argument("--seed", type=int, default=None)
        if out:
            p.add_argument("--out", required=True)
        if out_dir:
            p.add_argument("--out-dir", required=True)

    common(sub.add_parser("surface"), out=True)
    common(sub.add_parser("simulate"), out_dir=True)
    common(sub.add_parser("sample"), out=True)
    p = sub.add_parser("train")
    common(p, out=True)
    p.add_argument("--data", required=True)
    p = sub.add_parser("evaluate")
    common(p)
    p.add_argument("--out")
    p.add_argument("--data")
    p.add_argument("--model")
    p.add_argument("--pred", help="snapshot to compare instead of a model")
    p.add_argument("--ref", help="reference snapshot for --pred")
    p.add_argument("--report", help="output CSV for --pred/--ref form")
    p = sub.add_parser("sweep")
    common(p, out_dir=True)
    p.add_argument("--axis", required=True)
    p.add_argument("--values", required=True,
                   help="comma-separated list of axis values")
    return parser


_COMMANDS = {
    "surface": cmd_surface,
    "simulate": cmd_simulate,
    "sample": cmd_sample,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
}


def _apply_thread_cap():
    threads = os.environ.get("ROUGHFLOW_THREADS")
    if not threads:
        return
    try:
        n = max(1, int(threads))
    except ValueError:
        raise ParameterError(f"ROUGHFLOW_THREADS must be an integer, "
                             f"got {threads!r}")
    try:
        import numba
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except ImportError:
        pass


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        _apply_thread_cap()
        return _COMMANDS[args.command](args)
    except RoughflowError as exc:
        print(f"error kind={type(exc).__name__} msg={str(exc)!r}",
              file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error kind=OSError msg={str(exc)!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
