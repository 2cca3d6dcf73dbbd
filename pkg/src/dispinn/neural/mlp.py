"""Dense multilayer perceptron with cached forward and exact reverse-mode
parameter gradients. Hidden layers share one activation; the output layer
is linear (regression)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError, UsageError

# activation and its derivative expressed through the activation OUTPUT
ACTIVATIONS = {
    "tanh": (np.tanh, lambda y: 1.0 - y * y),
    "sigmoid": (lambda x: 1.0 / (1.0 + np.exp(-x)), lambda y: y * (1.0 - y)),
    "relu": (lambda x: np.maximum(x, 0.0), lambda y: (y > 0.0).astype(float)),
    "identity": (lambda x: x, lambda y: np.ones_like(y)),
}


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape if shape is not None else (fan_in, fan_out))


@dataclass
class MlpParams:
    """Layer list of (weights, bias); weights are (fan_in, fan_out)."""

    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(self.biases):
            raise ShapeError("weights and biases must pair up per layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape[1] != b.shape[0]:
                raise ShapeError(f"layer {i}: weight {w.shape} vs bias {b.shape}")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ShapeError(f"layer {i}: input dim does not chain")

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def tree(self) -> dict:
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"w{i}"] = w
            out[f"b{i}"] = b
        return out

    def with_tree(self, tree: dict) -> "MlpParams":
        n = self.n_layers
        return MlpParams(
            weights=[tree[f"w{i}"] for i in range(n)],
            biases=[tree[f"b{i}"] for i in range(n)],
            activation=self.activation,
        )


def init_mlp(layer_dims, rng: np.random.Generator, activation: str = "tanh") -> MlpParams:
    """Seeded Glorot-uniform initialization for dims [in, h1, ..., out]."""
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        weights.append(glorot_uniform(rng, fan_in, fan_out))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights=weights, biases=biases, activation=activation)


class Mlp:
    """Stateful wrapper caching activations between forward and backward."""

    def __init__(self, params: MlpParams):
        self.params = params
        self._cache = None

    @property
    def in_dim(self) -> int:
        return self.params.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.params.weights[-1].shape[1]

    def forward(self, inputs: np.ndarray) -> np.ndarray:
        x = np.asarray(inputs, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeError(f"inputs {x.shape} incompatible with in_dim {self.in_dim}")
        act, _ = ACTIVATIONS[self.params.activation]
        layers = [x]
        for i in range(self.params.n_layers):
            z = layers[-1] @ self.params.weights[i] + self.params.biases[i]
            last = i == self.params.n_layers - 1
            layers.append(z if last else act(z))
        self._cache = layers
        return layers[-1]

    def backward(self, upstream: np.ndarray) -> dict:
        """Gradients of sum(outputs * upstream) w.r.t. every parameter."""
        if self._cache is None:
            raise UsageError("backward called before forward")
        layers = self._cache
        g = np.asarray(upstream, dtype=float)
        if g.shape != layers[-1].shape:
            raise ShapeError(f"upstream {g.shape} != outputs {layers[-1].shape}")
        _, dact = ACTIVATIONS[self.params.activation]
        grads = {}
        for i in range(self.params.n_layers - 1, -1, -1):
            grads[f"w{i}"] = layers[i].T @ g
            grads[f"b{i}"] = g.sum(axis=0)
            if i:
                g = (g @ self.params.weights[i].T) * dact(layers[i])
        return grads


def mlp_forward(params: MlpParams, inputs) -> np.ndarray:
    """Pure forward pass (no cache retained)."""
    return Mlp(params).forward(inputs)
