"""Exact differentiation for small fully connected networks.

Two passes are provided:

* A Taylor-mode forward pass that carries, alongside each activation value,
  its first and second derivatives with respect to every input coordinate
  (diagonal second derivatives only).
* A reverse pass over that augmented forward computation, giving exact
  gradients of any scalar built from (values, first derivatives, second
  derivatives) with respect to all parameters.  The reverse pass needs
  activation derivatives up to third order.

Everything is float64 and deterministic for fixed inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .errors import ParameterError, UnsupportedActivationError

ACTIVATIONS = ("tanh", "relu", "elu", "gelu")

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _tanh_derivs(a, order):
    t = np.tanh(a)
    out = [t]
    if order >= 1:
        s = 1.0 - t * t
        out.append(s)
    if order >= 2:
        out.append(-2.0 * t * s)
    if order >= 3:
        out.append(s * (6.0 * t * t - 2.0))
    return out


def _relu_derivs(a, order):
    pos = (a > 0).astype(np.float64)
    out = [np.maximum(a, 0.0)]
    if order >= 1:
        out.append(pos)
    if order >= 2:
        raise UnsupportedActivationError(
            "relu has no second derivative; use tanh, elu, or gelu"
        )
    return out


def _elu_derivs(a, order):
    neg = a <= 0
    e = np.where(neg, np.exp(np.minimum(a, 0.0)), 1.0)
    out = [np.where(neg, e - 1.0, a)]
    if order >= 1:
        out.append(np.where(neg, e, 1.0))
    if order >= 2:
        out.append(np.where(neg, e, 0.0))
    if order >= 3:
        out.append(np.where(neg, e, 0.0))
    return out


def _gelu_derivs(a, order):
    # exact Gaussian-CDF form: gelu(a) = a * Phi(a)
    phi_cdf = 0.5 * (1.0 + erf(a * _INV_SQRT2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * a * a)
    out = [a * phi_cdf]
    if order >= 1:
        out.append(phi_cdf + a * pdf)
    if order >= 2:
        out.append(pdf * (2.0 - a * a))
    if order >= 3:
        out.append(pdf * (a * a * a - 4.0 * a))
    return out


_ACT_TABLE = {
    "tanh": _tanh_derivs,
    "relu": _relu_derivs,
    "elu": _elu_derivs,
    "gelu": _gelu_derivs,
}


def activation_derivs(name, a, order):
    try:
        fn = _ACT_TABLE[name]
    except KeyError:
        raise UnsupportedActivationError(f"unknown activation {name!r}") from None
    return fn(a, order)


@dataclass(frozen=True)
class NetworkSpec:
    input_width: int
    hidden_layers: int
    hidden_width: int
    output_width: int
    activation: str = "tanh"
    init_seed: int = 0

    def __post_init__(self):
        if self.hidden_layers < 1:
            raise ParameterError("at least one hidden layer is required")
        if min(self.input_width, self.hidden_width, self.output_width) < 1:
            raise ParameterError("layer widths must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ParameterError(
                f"activation must be one of {ACTIVATIONS}, got {self.activation!r}"
            )

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        dims = [self.input_width] + [self.hidden_width] * self.hidden_layers \
            + [self.output_width]
        return list(zip(dims[:-1], dims[1:]))


class ParameterSet:
    """Per-layer weights and biases with a flat-vector view."""

    def __init__(self, weights, biases):
        if len(weights) != len(biases):
            raise ParameterError("weights and biases must pair up per layer")
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or b.ndim != 1 or w.shape[1] != b.shape[0]:
                raise ParameterError(f"inconsistent layer shapes {w.shape}, {b.shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ParameterError("parameters must be finite")

    @property
    def n_layers(self):
        return len(self.weights)

    @property
    def size(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def to_vector(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    @classmethod
    def from_vector(cls, vec, shapes) -> "ParameterSet":
        """shapes: list of (fan_in, fan_out) per layer."""
        vec = np.asarray(vec, dtype=np.float64)
        expected = sum(fi * fo + fo for fi, fo in shapes)
        if vec.size != expected:
            raise ParameterError(
                f"vector length {vec.size} != expected {expected}")
        weights, biases, k = [], [], 0
        for fi, fo in shapes:
            weights.append(vec[k:k + fi * fo].reshape(fi, fo))
            k += fi * fo
            biases.append(vec[k:k + fo])
            k += fo
        return cls(weights, biases)

    def shapes(self):
        return [w.shape for w in self.weights]

    def copy(self) -> "ParameterSet":
        return ParameterSet([w.copy() for w in self.weights],
                            [b.copy() for b in self.biases])


def init_parameters(spec: NetworkSpec) -> ParameterSet:
    """Glorot-uniform weights, zero biases; reproducible per seed."""
    gen = np.random.Generator(np.random.PCG64(spec.init_seed))
    weights, biases = [], []
    for fan_in, fan_out in spec.layer_dims:
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(gen.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return ParameterSet(weights, biases)


class Tape:
    """Record of one augmented forward pass, ready for the reverse pass.

    Attributes ``y`` (N, dout), and when derivatives were requested,
    ``jac`` and ``hess_diag`` of shape (N, dout, din).
    """

    def __init__(self, params, activation, records, y, g_out, h_out):
        self._params = params
        self._activation = activation
        self._records = records
        self.y = y
        self._g_out = g_out  # (din, N, dout) or None
        self._h_out = h_out
        self.with_derivatives = g_out is not None

    @property
    def jac(self):
        if self._g_out is None:
            raise ParameterError("tape was built without input derivatives")
        return np.transpose(self._g_out, (1, 2, 0))

    @property
    def hess_diag(self):
        if self._h_out is None:
            raise ParameterError("tape was built without input derivatives")
        return np.transpose(self._h_out, (1, 2, 0))

    def backprop(self, ybar, jbar=None, hbar=None) -> np.ndarray:
        """Gradient of sum(ybar*y) + sum(jbar*jac) + sum(hbar*hess_diag)
        with respect to the flat parameter vector."""
        weights = self._params.weights
        n_layers = len(weights)
        zbar = np.asarray(ybar, dtype=np.float64)
        if self.with_derivatives:
            dn = self._g_out.shape[0]
            gbar = (np.zeros_like(self._g_out) if jbar is None
                    else np.ascontiguousarray(np.transpose(jbar, (2, 0, 1))))
            hbar_ = (np.zeros_like(self._h_out) if hbar is None
                     else np.ascontiguousarray(np.transpose(hbar, (2, 0, 1))))
        else:
            if jbar is not None or hbar is not None:
                raise ParameterError("tape carries no derivative channels")
            gbar = hbar_ = None

        grad_w = [None] * n_layers
        grad_b = [None] * n_layers

        for layer in range(n_layers - 1, -1, -1):
            rec = self._records[layer]
            w = weights[layer]
            if rec["hidden"]:
                s1, s2, s3 = rec["s1"], rec["s2"], rec["s3"]
                ga, ha = rec["ga"], rec["ha"]
                abar = zbar * s1
                if gbar is not None:
                    abar = abar + np.sum(gbar * s2 * ga, axis=0)
                    if s3 is not None:
                        abar = abar + np.sum(
                            hbar_ * (s2 * ha + s3 * ga * ga), axis=0)
                    gabar = gbar * s1 + hbar_ * (2.0 * s2 * ga)
                    habar = hbar_ * s1
            else:
                abar = zbar
                if gbar is not None:
                    gabar, habar = gbar, hbar_

            z_in, g_in, h_in = rec["z_in"], rec["g_in"], rec["h_in"]
            gw = z_in.T @ abar
            gb = abar.sum(axis=0)
            if gbar is not None:
                gw = gw + np.einsum("dnk,dnm->km", g_in, gabar)
                gw = gw + np.einsum("dnk,dnm->km", h_in, habar)
            grad_w[layer] = gw
            grad_b[layer] = gb

            zbar = abar @ w.T
            if gbar is not None:
                gbar = gabar @ w.T
                hbar_ = habar @ w.T

        parts = []
        for gw, gb in zip(grad_w, grad_b):
            parts.append(gw.ravel())
            parts.append(gb)
        return np.concatenate(parts)


def _as_batch(x, input_width):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != input_width:
        raise ParameterError(
            f"input shape {x.shape} incompatible with width {input_width}"
        )
    return x, single


def forward_tape(
    params: ParameterSet,
    x,
    activation: str,
    need_input_derivs: bool = False,
) -> Tape:
    """Run the (augmented) forward pass and return its tape."""
    din = params.weights[0].shape[0]
    x, _ = _as_batch(x, din)
    n = x.shape[0]
    n_layers = params.n_layers
    # reverse pass through second-derivative channels needs 3rd-order
    # activation derivatives
    order = 3 if need_input_derivs else 1

    z = x
    if need_input_derivs:
        g = np.zeros((din, n, din))
        for d in range(din):
            g[d, :, d] = 1.0
        h = np.zeros((din, n, din))
    else:
        g = h = None

    records = []
    for layer in range(n_layers):
        w = params.weights[layer]
        b = params.biases[layer]
        hidden = layer < n_layers - 1
        a = z @ w + b
        ga = g @ w if g is not None else None
        ha = h @ w if h is not None else None
        rec = {"hidden": hidden, "z_in": z, "g_in": g, "h_in": h,
               "ga": ga, "ha": ha, "s1": None, "s2": None, "s3": None}
        if hidden:
            derivs = activation_derivs(activation, a, order)
            z = derivs[0]
            s1 = derivs[1]
            rec["s1"] = s1
            if need_input_derivs:
                s2, s3 = derivs[2], derivs[3]
                rec["s2"], rec["s3"] = s2, s3
                h = s1 * ha + s2 * ga * ga
                g = s1 * ga
            else:
                g = h = None
        else:
            z = a
            g, h = ga, ha
        records.append(rec)

    return Tape(params, activation, records, z, g, h)


def forward(params: ParameterSet, x, activation: str = "tanh") -> np.ndarray:
    """Plain forward evaluation; accepts a single point or a batch."""
    din = params.weights[0].shape[0]
    xb, single = _as_batch(x, din)
    y = forward_tape(params, xb, activation).y
    return y[0] if single else y


def input_derivatives(params: ParameterSet, x, activation: str = "tanh"):
    """Jacobian and diagonal second derivatives of outputs w.r.t. inputs.

    Returns (J, H) with shapes (dout, din) for a single point or
    (N, dout, din) for a batch.
    """
    din = params.weights[0].shape[0]
    xb, single = _as_batch(x, din)
    tape = forward_tape(params, xb, activation, need_input_derivs=True)
    j, hd = tape.jac, tape.hess_diag
    return (j[0], hd[0]) if single else (j, hd)
