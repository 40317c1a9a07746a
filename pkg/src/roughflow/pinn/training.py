"""Two-phase training driver: minibatch Adam followed by full-batch L-BFGS.

Every iteration appends a history row (iteration, phase, learning rate,
total loss, and the per-term breakdown).  A non-finite loss aborts the run
and returns the last finite-loss parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..errors import ParameterError, SingularDensityError
from .losses import LossWeights, total_loss_and_grad
from .model import PinnModel
from . import optimize

HISTORY_COLUMNS = ("iter", "phase", "lr", "total", "data", "mom", "cont",
                   "bc", "moment")


@dataclass(frozen=True)
class TrainConfig:
    adam_iters: int = 2000
    lbfgs_iters: int = 500
    learning_rate: float = 1e-3
    lr_decay: float = 0.95
    lr_decay_interval: int = 200
    batch_size: int = 0          # 0 = full batch during the Adam phase
    lbfgs_history: int = 20
    weights: LossWeights = field(default_factory=LossWeights)
    outlet_pressure_nd: float = 0.0
    seed: int = 0
    log_interval: int = 1        # record every k-th iteration in history

    def __post_init__(self):
        if self.adam_iters < 0 or self.lbfgs_iters < 0:
            raise ParameterError("iteration counts must be nonnegative")
        if self.learning_rate <= 0:
            raise ParameterError("learning rate must be positive")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ParameterError("lr decay must lie in (0, 1]")
        if self.batch_size < 0:
            raise ParameterError("batch size must be nonnegative")
        if self.log_interval < 1:
            raise ParameterError("log interval must be at least 1")


@dataclass
class HistoryRow:
    iter: int
    phase: str
    lr: float
    total: float
    data: float
    mom: float
    cont: float
    bc: float
    moment: float

    def astuple(self):
        return (self.iter, self.phase, self.lr, self.total, self.data,
                self.mom, self.cont, self.bc, self.moment)


def _minibatches(rng, n, batch_size):
    """Yield index arrays covering a fresh shuffled epoch, forever."""
    while True:
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            yield order[start:start + batch_size]


def train(model: PinnModel, dataset, collocation, config: TrainConfig):
    """Run the Adam then L-BFGS schedule; returns (model, history, info).

    history is a list of HistoryRow; info carries optimizer diagnostics
    (L-BFGS fallback steps, final gradient norm, abort flag).
    """
    x = model.params.to_vector()
    shapes = model.params.shapes()
    history: list[HistoryRow] = []
    info = {"aborted": False, "fallback_steps": 0, "lbfgs_iterations": 0}

    def rebuilt(vec):
        return model.with_params(ad.ParameterSet.from_vector(vec, shapes))

    def objective(vec, data_idx=None, colloc_idx=None):
        m = rebuilt(vec)
        return total_loss_and_grad(
            m, dataset, collocation, config.weights,
            outlet_pressure_nd=config.outlet_pressure_nd,
            data_idx=data_idx, colloc_idx=colloc_idx,
        )

    def record(iteration, phase, lr, value, breakdown):
        if iteration % config.log_interval == 0:
            history.append(HistoryRow(
                iter=iteration, phase=phase, lr=lr, total=value,
                data=breakdown["data"], mom=breakdown["mom"],
                cont=breakdown["cont"], bc=breakdown["bc"],
                moment=breakdown["moment"],
            ))

    rng = np.random.default_rng(config.seed)
    last_good = x.copy()
    iteration = 0

    # ---- Adam phase -------------------------------------------------------
    if config.adam_iters > 0:
        state = optimize.adam_init(x.size)
        n_data = len(dataset) if dataset is not None else 0
        n_colloc = (collocation.interior.shape[0]
                    if collocation is not None else 0)
        use_batches = config.batch_size > 0
        data_gen = (_minibatches(rng, n_data, config.batch_size)
                    if use_batches and n_data else None)
        colloc_gen = (_minibatches(rng, n_colloc, config.batch_size)
                      if use_batches and n_colloc else None)
        for k in range(config.adam_iters):
            iteration += 1
            lr = optimize.decayed_lr(config.learning_rate, k,
                                     config.lr_decay,
                                     config.lr_decay_interval)
            didx = next(data_gen) if data_gen is not None else None
            cidx = next(colloc_gen) if colloc_gen is not None else None
            try:
                value, breakdown, grad = objective(x, didx, cidx)
            except SingularDensityError:
                value = np.inf
            if not np.isfinite(value):
                info["aborted"] = True
                return rebuilt(last_good), history, info
            last_good = x.copy()
            record(iteration, "adam", lr, value, breakdown)
            x = optimize.adam_step(x, grad, state, lr)

    # ---- L-BFGS phase -----------------------------------------------------
    if config.lbfgs_iters > 0:
        last_breakdown = {}

        def fun(vec):
            try:
                value, breakdown, grad = objective(vec)
            except SingularDensityError:
                # an unphysical trial point; the line search backs off
                return np.inf, np.zeros_like(vec)
            last_breakdown.clear()
            last_breakdown.update(breakdown)
            if not np.isfinite(value):
                return np.inf, grad  # rejected by the line search
            return value, grad

        base_iter = iteration

        def callback(k, vec, f, g):
            nonlocal last_good
            last_good = vec.copy()
            record(base_iter + k, "lbfgs", 0.0, f, dict(last_breakdown))

        x, f_final, lbfgs_info = optimize.lbfgs(
            fun, x, config.lbfgs_iters, history=config.lbfgs_history,
            callback=callback,
        )
        info["fallback_steps"] = lbfgs_info["fallback_steps"]
        info["lbfgs_iterations"] = lbfgs_info["iterations"]
        info["grad_norm"] = lbfgs_info["grad_norm"]
        if not np.isfinite(f_final):
            info["aborted"] = True
            return rebuilt(last_good), history, info

    return rebuilt(x), history, info
