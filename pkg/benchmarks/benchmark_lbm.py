#!/usr/bin/env python3
"""Benchmark the lattice-solver hot loop: numba kernels vs pure numpy.

Runs the same rough-channel configuration through both backends and
reports wall time, steps/second, and million lattice-node updates per
second (MLUPS).  The numba figure excludes JIT compilation (one warmup
step is taken first).

Usage: python3 benchmarks/benchmark_lbm.py [--nx 400] [--ny 100] [--steps 2000]
"""

import argparse
import time

import numpy as np

from roughflow.lbm import FlowParams, LatticeSpec, initial_state
from roughflow.lbm import kernels_numpy
from roughflow.surface import (FractalSurfaceSpec, Side, generate_wm_profile,
                               rasterize_walls)

try:
    from roughflow.lbm import kernels_numba
except ImportError:
    kernels_numba = None


def build_case(nx, ny):
    xs = np.arange(nx, dtype=float) / nx
    bottom = generate_wm_profile(
        FractalSurfaceSpec(amplitude=0.04 * ny, phase_seed=0), xs, Side.BOTTOM)
    top = generate_wm_profile(
        FractalSurfaceSpec(amplitude=0.04 * ny, phase_seed=1), xs, Side.TOP)
    mask = rasterize_walls(top, bottom, nx, ny, mean_gap=0.75 * ny)
    spec = LatticeSpec(nx=nx, ny=ny, mask=mask)
    params = FlowParams.from_reynolds(inlet_speed=0.05, reynolds=20.0,
                                      gap=0.75 * ny)
    return spec, params


def run_backend(kernels, spec, params, steps):
    state = initial_state(spec)
    f = state.f
    # warmup (includes JIT compile for numba)
    f = kernels.step(f, spec.mask, params.tau, params.inlet_speed,
                     params.outlet_density, False)
    start = time.perf_counter()
    for _ in range(steps):
        f = kernels.step(f, spec.mask, params.tau, params.inlet_speed,
                         params.outlet_density, False)
    elapsed = time.perf_counter() - start
    return elapsed, f


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nx", type=int, default=400)
    ap.add_argument("--ny", type=int, default=100)
    ap.add_argument("--steps", type=int, default=2000)
    args = ap.parse_args()

    spec, params = build_case(args.nx, args.ny)
    nodes = args.nx * args.ny
    print(f"grid {args.nx}x{args.ny} ({nodes} nodes), {args.steps} steps, "
          f"tau = {params.tau:.3f}")

    results = {}
    backends = [("numpy", kernels_numpy)]
    if kernels_numba is not None:
        backends.append(("numba", kernels_numba))
    for name, kernels in backends:
        elapsed, f = run_backend(kernels, spec, params, args.steps)
        mlups = nodes * args.steps / elapsed / 1e6
        results[name] = (elapsed, f)
        print(f"{name:>6}: {elapsed:8.2f} s  "
              f"{args.steps / elapsed:8.1f} steps/s  {mlups:7.1f} MLUPS")

    if len(results) == 2:
        diff = np.max(np.abs(results["numpy"][1] - results["numba"][1]))
        speedup = results["numpy"][0] / results["numba"][0]
        print(f"numba speedup: {speedup:.1f}x;  "
              f"max |f_numpy - f_numba| = {diff:.3e}")


if __name__ == "__main__":
    main()
