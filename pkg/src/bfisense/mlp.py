"""Three-layer perceptron regressor with plain momentum SGD, all numpy.

Small and deterministic on purpose: seeded init, seeded shuffling, explicit
backprop that a finite-difference check can audit.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

_ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class MlpSpec:
    """Architecture and training hyperparameters for the positioning regressor."""

    layer_sizes: tuple
    activation: str = "relu"
    epochs: int = 200
    learning_rate: float = 1e-3
    batch_size: int = 64
    momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) != 3:
            raise InvalidInputError(f"expected [n_in, hidden, n_out] layer sizes, got {sizes}")
        if any(s < 1 for s in sizes):
            raise InvalidInputError("layer sizes must be positive")
        if self.activation not in _ACTIVATIONS:
            raise InvalidInputError(f"activation must be one of {_ACTIVATIONS}")
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise InvalidInputError("epochs, batch_size must be >= 1 and learning_rate > 0")
        object.__setattr__(self, "layer_sizes", sizes)


def init_params(spec: MlpSpec) -> dict:
    """He-style seeded initialization."""
    n_in, hidden, n_out = spec.layer_sizes
    rng = np.random.default_rng(spec.seed)
    return {
        "w1": rng.standard_normal((n_in, hidden)) * np.sqrt(2.0 / n_in),
        "b1": np.zeros(hidden),
        "w2": rng.standard_normal((hidden, n_out)) * np.sqrt(2.0 / hidden),
        "b2": np.zeros(n_out),
    }


def _act(z, kind):
    return np.maximum(z, 0.0) if kind == "relu" else np.tanh(z)


def _act_grad(z, kind):
    return (z > 0).astype(float) if kind == "relu" else 1.0 - np.tanh(z) ** 2


def forward(params: dict, x: np.ndarray, activation: str = "relu") -> np.ndarray:
    z1 = x @ params["w1"] + params["b1"]
    return _act(z1, activation) @ params["w2"] + params["b2"]


def loss_and_grads(params: dict, x: np.ndarray, y: np.ndarray, activation: str = "relu"):
    """Mean squared error over batch and output dims, with its backprop gradients."""
    z1 = x @ params["w1"] + params["b1"]
    a1 = _act(z1, activation)
    yhat = a1 @ params["w2"] + params["b2"]
    diff = yhat - y
    loss = float(np.mean(diff ** 2))
    d_out = 2.0 * diff / diff.size
    grads = {
        "w2": a1.T @ d_out,
        "b2": d_out.sum(axis=0),
    }
    d_a1 = d_out @ params["w2"].T
    d_z1 = d_a1 * _act_grad(z1, activation)
    grads["w1"] = x.T @ d_z1
    grads["b1"] = d_z1.sum(axis=0)
    return loss, grads


def train(spec: MlpSpec, x: np.ndarray, y: np.ndarray) -> dict:
    """Momentum SGD over shuffled mini-batches; deterministic in spec.seed."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise InvalidInputError("x must be (S, n_in) and y (S, n_out) with matching S")
    if x.shape[1] != spec.layer_sizes[0] or y.shape[1] != spec.layer_sizes[2]:
        raise InvalidInputError(
            f"data dims {x.shape[1]}->{y.shape[1]} do not match layer sizes {spec.layer_sizes}")
    params = init_params(spec)
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    rng = np.random.default_rng(spec.seed + 1)
    n = x.shape[0]
    for _ in range(spec.epochs):
        order = rng.permutation(n)
        for start in range(0, n, spec.batch_size):
            idx = order[start:start + spec.batch_size]
            _, grads = loss_and_grads(params, x[idx], y[idx], spec.activation)
            for key in params:
                velocity[key] = spec.momentum * velocity[key] - spec.learning_rate * grads[key]
                params[key] = params[key] + velocity[key]
    return params


def finite_difference_grads(params: dict, x: np.ndarray, y: np.ndarray,
                            activation: str = "relu", step: float = 1e-6) -> dict:
    """Central-difference loss gradients, the reference for the backprop check."""
    out = {}
    for key, value in params.items():
        grad = np.zeros_like(value)
        flat = value.reshape(-1)
        gflat = grad.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + step
            lp, _ = loss_and_grads(params, x, y, activation)
            flat[idx] = orig - step
            lm, _ = loss_and_grads(params, x, y, activation)
            flat[idx] = orig
            gflat[idx] = (lp - lm) / (2.0 * step)
        out[key] = grad
    return out
