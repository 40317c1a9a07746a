"""Optimizers for the training loop: Adam with exponential learning-rate
decay, and L-BFGS with a strong-Wolfe line search plus a steepest-descent
fallback.  Both operate on flat parameter vectors and are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0


def adam_init(n: int) -> AdamState:
    return AdamState(m=np.zeros(n), v=np.zeros(n))


def adam_step(x, grad, state: AdamState, lr,
              beta1=0.9, beta2=0.999, eps=1e-8):
    state.t += 1
    state.m = beta1 * state.m + (1.0 - beta1) * grad
    state.v = beta2 * state.v + (1.0 - beta2) * grad * grad
    mhat = state.m / (1.0 - beta1**state.t)
    vhat = state.v / (1.0 - beta2**state.t)
    return x - lr * mhat / (np.sqrt(vhat) + eps)


def decayed_lr(base_lr, iteration, decay=0.95, interval=200):
    """Exponential schedule: base * decay^(iteration // interval)."""
    return base_lr * decay ** (iteration // interval)


def _wolfe_line_search(fun, x, f0, g0, direction,
                       c1=1e-4, c2=0.9, max_evals=25):
    """Strong Wolfe search along `direction`; returns (alpha, f, g) or None."""
    d_dot_g0 = float(np.dot(g0, direction))
    if d_dot_g0 >= 0:
        return None

    def phi(alpha):
        f, g = fun(x + alpha * direction)
        return f, g, float(np.dot(g, direction))

    alpha_prev, f_prev, dphi_prev = 0.0, f0, d_dot_g0
    alpha = 1.0
    result_prev = None
    for _ in range(max_evals):
        f, g, dphi = phi(alpha)
        if not np.isfinite(f):
            alpha = 0.5 * (alpha_prev + alpha)
            continue
        slack = 1e-14 * abs(f0)  # rounding allowance near convergence
        if f > f0 + c1 * alpha * d_dot_g0 + slack or (result_prev and f >= f_prev):
            return _zoom(phi, f0, d_dot_g0, alpha_prev, alpha, f_prev, c1, c2)
        if abs(dphi) <= -c2 * d_dot_g0:
            return alpha, f, g
        if dphi >= 0:
            return _zoom(phi, f0, d_dot_g0, alpha, alpha_prev, f, c1, c2)
        alpha_prev, f_prev, dphi_prev = alpha, f, dphi
        result_prev = (alpha, f, g)
        alpha *= 2.0
    return None


def _zoom(phi, f0, dphi0, lo, hi, f_lo, c1, c2, max_iters=25):
    for _ in range(max_iters):
        alpha = 0.5 * (lo + hi)
        f, g, dphi = phi(alpha)
        slack = 1e-14 * abs(f0)
        if not np.isfinite(f) or f > f0 + c1 * alpha * dphi0 + slack or f >= f_lo + slack:
            hi = alpha
        else:
            if abs(dphi) <= -c2 * dphi0:
                return alpha, f, g
            if dphi * (hi - lo) >= 0:
                hi = lo
            lo, f_lo = alpha, f
        if abs(hi - lo) < 1e-16:
            break
    return None


def lbfgs(fun, x0, max_iters, history=20, grad_tol=1e-10, callback=None):
    """Minimize fun(x) -> (f, grad) with two-loop-recursion L-BFGS.

    On line-search failure a plain steepest-descent backtracking step is
    taken instead; the number of fallbacks is reported.

    Returns (x, f, info) where info records iterations and fallback count.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    f, g = fun(x)
    s_hist, y_hist, rho_hist = [], [], []
    fallbacks = 0
    iters = 0
    for iters in range(1, max_iters + 1):
        gnorm = np.linalg.norm(g)
        if gnorm < grad_tol:
            break
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y, r in zip(reversed(s_hist), reversed(y_hist),
                           reversed(rho_hist)):
            a = r * np.dot(s, q)
            alphas.append(a)
            q -= a * y
        if y_hist:
            gamma = np.dot(s_hist[-1], y_hist[-1]) / np.dot(y_hist[-1], y_hist[-1])
            q *= gamma
        for (s, y, r), a in zip(zip(s_hist, y_hist, rho_hist),
                                reversed(alphas)):
            b = r * np.dot(y, q)
            q += (a - b) * s
        direction = -q

        res = _wolfe_line_search(fun, x, f, g, direction)
        if res is None:
            # steepest-descent backtracking fallback
            fallbacks += 1
            direction = -g
            alpha = 1.0 / max(gnorm, 1.0)
            res = None
            for _ in range(40):
                f_new, g_new = fun(x + alpha * direction)
                if np.isfinite(f_new) and f_new < f:
                    res = (alpha, f_new, g_new)
                    break
                alpha *= 0.5
            if res is None:
                break  # no descent possible
        alpha, f_new, g_new = res
        x_new = x + alpha * direction
        s = x_new - x
        y = g_new - g
        sy = np.dot(s, y)
        if sy > 1e-14:
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > history:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
        x, f, g = x_new, f_new, g_new
        if callback is not None:
            callback(iters, x, f, g)
    return x, f, {"iterations": iters, "fallback_steps": fallbacks,
                  "grad_norm": float(np.linalg.norm(g))}
