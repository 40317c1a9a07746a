"""Shared fixtures for the acceptance suite.

The expensive artifacts — the full-size rough-channel run with its trained
surrogate, and the reduced study case reused by the sampling/optimizer
comparisons — are built once per session and shared across criteria.

Both cases train on the last five snapshots of a long run, i.e. on the
developed-flow window; the startup transient is not part of the surrogate's
task.  Loss weights are rebalanced toward the data term (the defaults
weight physics terms for residual-driven exploration; reconstruction
accuracy wants the opposite), and Adam runs at a higher initial rate
before the L-BFGS polish.
"""
import dataclasses
import time
from types import SimpleNamespace

import pytest

from roughflow import datastore as ds
from roughflow.cli import simulate, train_surrogate, evaluate_surrogate

# One line per acceptance criterion, echoed after the run summary (stdout
# inside tests is captured; the terminal summary is not).
CRITERION_LINES = []


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)

# Full-size reconstruction case: 200x50 lattice, amplitude-5 walls, Re 10,
# 8x128 tanh network on 2048 enriched collocation points, <= 2000 labeled
# points from 4 snapshots with the penultimate snapshot held out.
FULL_CONFIG = ds.RunConfig(
    amplitude=5.0, phase_seed=7,
    nx=200, ny=50, gap=36.0,
    inlet_speed=0.05, viscosity=0.18,
    total_steps=20000, snapshot_interval=1000,
    hidden_layers=8, hidden_width=128,
    adam_iters=2000, lbfgs_iters=1000,
    learning_rate=3e-3,
    batch_size=256, n_collocation=2048, n_boundary=256, n_data=2000,
    w_physics=0.1, w_cont=0.3, w_bc=0.15, band_fraction=0.6,
    seed=0,
)

# Reduced case for the directional studies (sampling strategy, optimizer
# schedule): smaller lattice and network, same physics, 3072 collocation
# points, default loss weights.
STUDY_CONFIG = ds.RunConfig(
    amplitude=4.0, phase_seed=7,
    nx=120, ny=50, gap=36.0,
    inlet_speed=0.05, viscosity=0.18,
    total_steps=20000, snapshot_interval=1000,
    hidden_layers=4, hidden_width=48,
    adam_iters=2000, lbfgs_iters=800,
    learning_rate=3e-3,
    batch_size=256, n_collocation=3072, n_boundary=128, n_data=1200,
    band_fraction=0.6,
    seed=0,
)


@pytest.fixture(scope="session")
def full_case():
    t0 = time.time()
    snapshots = list(simulate(FULL_CONFIG))[-5:]
    model, history, info, domain, holdout = train_surrogate(
        FULL_CONFIG, snapshots)
    report = evaluate_surrogate(model, domain, holdout)
    return SimpleNamespace(
        config=FULL_CONFIG, snapshots=snapshots, model=model,
        history=history, info=info, domain=domain, holdout=holdout,
        report=dict(((f, m), v) for f, m, v in report.rows()),
        runtime=time.time() - t0,
    )


@pytest.fixture(scope="session")
def study_snapshots():
    return list(simulate(STUDY_CONFIG))[-5:]


@pytest.fixture(scope="session")
def study_runs(study_snapshots):
    """Three trainings on the same data: enriched hybrid, uniform hybrid,
    and Adam-only at the same total iteration budget as the hybrids."""
    runs = {}
    for name, strategy, adam, lbfgs in (
            ("enriched", "near_wall_enriched", 2000, 800),
            ("uniform", "uniform", 2000, 800),
            ("adam_only", "near_wall_enriched", 2800, 0)):
        cfg = dataclasses.replace(STUDY_CONFIG, strategy=strategy,
                                  adam_iters=adam, lbfgs_iters=lbfgs)
        model, history, info, domain, holdout = train_surrogate(
            cfg, study_snapshots)
        runs[name] = SimpleNamespace(model=model, history=history,
                                     info=info, domain=domain)
    return runs
