"""Reconstruction autoencoder: a small fully connected network trained to
reproduce its input, scored by per-row reconstruction error.

The decoder mirrors the encoder widths, the final layer is linear, and
inputs are min-max scaled per column to [0, 1] using bounds captured at fit
time. Gradients are hand-derived, which keeps the network checkable against
central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, EmptyInputError


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z, a):
    return (z > 0.0).astype(float)


def _tanh(z):
    return np.tanh(z)


def _tanh_grad(z, a):
    return 1.0 - a**2


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _sigmoid_grad(z, a):
    return a * (1.0 - a)


def _linear(z):
    return z


def _linear_grad(z, a):
    return np.ones_like(z)


#: "linear" is internal, used by closed-form gradient tests; configs only
#: accept the three nonlinearities
ACTIVATIONS = {
    "relu": (_relu, _relu_grad),
    "tanh": (_tanh, _tanh_grad),
    "sigmoid": (_sigmoid, _sigmoid_grad),
    "linear": (_linear, _linear_grad),
}


class Mlp:
    """Dense network with one activation on hidden layers, linear output.

    Parameters live in self.weights / self.biases; loss_and_grads returns the
    mean-squared reconstruction loss and its exact gradients, so the training
    loop and the finite-difference check share one code path.
    """

    def __init__(self, dims: list[int], activation: str, rng):
        if activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation '{activation}'")
        if len(dims) < 2:
            raise ConfigError("network needs at least input and output dims")
        self.dims = list(dims)
        self.activation = activation
        self.weights = []
        self.biases = []
        for d_in, d_out in zip(dims[:-1], dims[1:]):
            bound = np.sqrt(6.0 / (d_in + d_out))
            self.weights.append(rng.uniform(-bound, bound, size=(d_in, d_out)))
            self.biases.append(np.zeros(d_out))

    def forward(self, X, dropout_rate: float = 0.0, rng=None):
        """Output plus the per-layer cache backprop needs.

        Dropout (inverted scaling) applies to hidden activations only, and
        only when an rng is supplied; scoring passes none.
        """
        act, _ = ACTIVATIONS[self.activation]
        a = np.asarray(X, dtype=float)
        cache = []
        last = len(self.weights) - 1
        for idx, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            if idx == last:
                cache.append((a, z, z, None))
                a = z
            else:
                h_pre = act(z)
                mask = None
                h = h_pre
                if dropout_rate > 0.0 and rng is not None:
                    keep = 1.0 - dropout_rate
                    mask = (rng.uniform(size=h_pre.shape) < keep) / keep
                    h = h_pre * mask
                cache.append((a, z, h_pre, mask))
                a = h
        return a, cache

    def loss_and_grads(self, X, target, dropout_rate: float = 0.0, rng=None):
        """Mean-squared loss and exact parameter gradients.

        delta bookkeeping: entering layer idx, delta holds dL/d(layer
        output); hidden layers peel off the dropout mask, then the
        activation derivative evaluated at the pre-dropout activation.
        """
        _, act_grad = ACTIVATIONS[self.activation]
        out, cache = self.forward(X, dropout_rate=dropout_rate, rng=rng)
        target = np.asarray(target, dtype=float)
        n, d_out = out.shape
        resid = out - target
        loss = float(np.mean(resid**2))
        delta = 2.0 * resid / (n * d_out)
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        last = len(self.weights) - 1
        for idx in range(last, -1, -1):
            a_in, z, h_pre, mask = cache[idx]
            if idx != last:
                if mask is not None:
                    delta = delta * mask
                delta = delta * act_grad(z, h_pre)
            grads_w[idx] = a_in.T @ delta
            grads_b[idx] = delta.sum(axis=0)
            if idx > 0:
                delta = delta @ self.weights[idx].T
        return loss, grads_w, grads_b

    def flat_params(self) -> np.ndarray:
        parts = []
        for W, b in zip(self.weights, self.biases):
            parts.append(W.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)

    def set_flat_params(self, theta: np.ndarray) -> None:
        pos = 0
        for idx, (W, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[idx] = theta[pos : pos + W.size].reshape(W.shape).copy()
            pos += W.size
            self.biases[idx] = theta[pos : pos + b.size].reshape(b.shape).copy()
            pos += b.size


def mirror_dims(d_in: int, hidden: tuple[int, ...]) -> list[int]:
    """Encoder widths reflected around the bottleneck: [d, h1..hk, ..h1, d]."""
    hidden = list(hidden)
    return [d_in] + hidden + hidden[-2::-1] + [d_in]


class _Optimizer:
    """sgd / momentum(0.9) / adaptive-moment updates over a flat view."""

    def __init__(self, name: str, lr: float, n_params: int):
        self.name = name
        self.lr = lr
        self.velocity = np.zeros(n_params)
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.name == "sgd":
            return theta - self.lr * grad
        if self.name == "momentum":
            self.velocity = 0.9 * self.velocity - self.lr * grad
            return theta + self.velocity
        self.t += 1
        beta1, beta2, eps = 0.9, 0.999, 1e-8
        self.m = beta1 * self.m + (1.0 - beta1) * grad
        self.v = beta2 * self.v + (1.0 - beta2) * grad**2
        m_hat = self.m / (1.0 - beta1**self.t)
        v_hat = self.v / (1.0 - beta2**self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + eps)


def _flatten_grads(grads_w, grads_b) -> np.ndarray:
    parts = []
    for gw, gb in zip(grads_w, grads_b):
        parts.append(gw.ravel())
        parts.append(gb.ravel())
    return np.concatenate(parts)


@dataclass
class AutoencoderState:
    mlp: Mlp
    lo: np.ndarray
    span: np.ndarray
    loss_trace: list = field(default_factory=list)


def _scale(X, lo, span):
    return (np.asarray(X, dtype=float) - lo) / span


def fit_autoencoder(params: dict, X: np.ndarray, rng) -> AutoencoderState:
    n, d = X.shape
    if n < 2:
        raise EmptyInputError("need at least 2 rows to train the network")
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    span = np.where(span == 0.0, 1.0, span)
    scaled = _scale(X, lo, span)

    dims = mirror_dims(d, tuple(params["hidden_neuron_list"]))
    mlp = Mlp(dims, params["hidden_activation_name"], rng)
    opt = _Optimizer(
        params["optimizer_name"], params["learning_rate"],
        mlp.flat_params().size,
    )
    state = AutoencoderState(mlp=mlp, lo=lo, span=span)
    batch = min(params["batch_size"], n)
    dropout = params["dropout_rate"]
    for _epoch in range(params["epoch_num"]):
        order = rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, batch):
            rows = scaled[order[start : start + batch]]
            loss, gw, gb = mlp.loss_and_grads(
                rows, rows, dropout_rate=dropout, rng=rng
            )
            theta = opt.step(mlp.flat_params(), _flatten_grads(gw, gb))
            mlp.set_flat_params(theta)
            epoch_loss += loss
            n_batches += 1
        state.loss_trace.append(epoch_loss / max(n_batches, 1))
    return state


def score_autoencoder(state: AutoencoderState, X: np.ndarray) -> np.ndarray:
    scaled = _scale(X, state.lo, state.span)
    out, _ = state.mlp.forward(scaled)
    return np.mean((out - scaled) ** 2, axis=1)


def gradient_check(mlp: Mlp, X, step: float = 1e-5) -> float:
    """Max relative disagreement between backprop and central differences.

    Relative error uses |a - n| / max(1e-8, |a| + |n|), so an identically
    zero gradient pair scores 0 rather than 0/0.
    """
    X = np.asarray(X, dtype=float)
    _, gw, gb = mlp.loss_and_grads(X, X)
    analytic = _flatten_grads(gw, gb)
    theta = mlp.flat_params()
    numeric = np.empty_like(theta)
    for i in range(theta.size):
        bumped = theta.copy()
        bumped[i] = theta[i] + step
        mlp.set_flat_params(bumped)
        hi, _, _ = mlp.loss_and_grads(X, X)
        bumped[i] = theta[i] - step
        mlp.set_flat_params(bumped)
        lo, _, _ = mlp.loss_and_grads(X, X)
        numeric[i] = (hi - lo) / (2.0 * step)
    mlp.set_flat_params(theta)
    denom = np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / denom))
