"""Small dense softmax classifier trained by backpropagation.

Hidden layers are affine + ReLU, the output layer affine + softmax. The loss
gradient is supplied with respect to the softmax output, so any loss defined
on probability vectors can drive training.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DimensionError, NonFiniteError


@dataclass(eq=False)
class Network:
    layer_dims: tuple
    weights: list
    biases: list
    seed: int = 0

    def __post_init__(self):
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise DimensionError("parameter count does not match layer_dims")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            shape = (self.layer_dims[i], self.layer_dims[i + 1])
            if w.shape != shape or b.shape != (shape[1],):
                raise DimensionError(f"layer {i}: weight {w.shape}/bias {b.shape}, expected {shape}")

    @property
    def k(self) -> int:
        return self.layer_dims[-1]

    @property
    def d_in(self) -> int:
        return self.layer_dims[0]

    def params(self) -> list:
        """Flat list ``[W0, b0, W1, b1, ...]`` sharing memory with the network."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "Network":
        return Network(
            self.layer_dims,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.seed,
        )


def init(layer_dims, seed: int) -> Network:
    """Glorot-uniform weights, zero biases."""
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2 or min(dims) < 1:
        raise DimensionError(f"need at least input and output widths >= 1, got {layer_dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Network(tuple(dims), weights, biases, seed)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _check_finite(net: Network):
    for p in net.params():
        if not np.all(np.isfinite(p)):
            raise NonFiniteError("network has non-finite parameters")


def forward(net: Network, inputs, return_cache: bool = False):
    x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if x.shape[1] != net.d_in:
        raise DimensionError(f"input width {x.shape[1]}, network expects {net.d_in}")
    _check_finite(net)
    acts = [x]
    h = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        h = softmax(z) if i == last else np.maximum(z, 0.0)
        acts.append(h)
    return (h, acts) if return_cache else h


def backward(net: Network, inputs, loss_grad, cache=None) -> list:
    """Gradients of the mean batch loss, in :meth:`Network.params` order.

    ``loss_grad[i]`` is the derivative of example ``i``'s loss w.r.t. its
    softmax output.
    """
    if cache is None:
        _, cache = forward(net, inputs, return_cache=True)
    probs = cache[-1]
    loss_grad = np.asarray(loss_grad, dtype=np.float64)
    if loss_grad.shape != probs.shape:
        raise DimensionError(f"loss gradient {loss_grad.shape}, outputs {probs.shape}")
    n = probs.shape[0]
    delta = kernels.softmax_backward(probs, loss_grad) / n
    grads = []
    for i in range(len(net.weights) - 1, -1, -1):
        h_prev = cache[i]
        grads.append(delta.sum(axis=0))
        grads.append(h_prev.T @ delta)
        if i:
            delta = (delta @ net.weights[i].T) * (h_prev > 0)
    grads.reverse()
    return grads


@dataclass(eq=False)
class TrainState:
    network: Network
    velocity: list = field(default_factory=list)
    epoch: int = 0
    rng_seed: int = 0

    def __post_init__(self):
        if not self.velocity:
            self.velocity = [np.zeros_like(p) for p in self.network.params()]


def sgd_step(state: TrainState, grads, lr: float, momentum: float) -> TrainState:
    """One momentum step; returns a new state and leaves ``state`` untouched."""
    if not lr > 0 or not 0 <= momentum < 1:
        raise ValueError(f"need lr > 0 and 0 <= momentum < 1, got {lr}, {momentum}")
    params = state.network.params()
    if len(grads) != len(params):
        raise DimensionError(f"{len(grads)} gradients for {len(params)} parameters")
    new_vel, new_params = [], []
    for p, v, g in zip(params, state.velocity, grads):
        if g.shape != p.shape:
            raise DimensionError(f"gradient shape {g.shape} vs parameter {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for parameter of shape {p.shape}")
        v = momentum * v - lr * g
        new_vel.append(v)
        new_params.append(p + v)
    net = Network(state.network.layer_dims, new_params[0::2], new_params[1::2], state.network.seed)
    return TrainState(net, new_vel, state.epoch, state.rng_seed)


# --- checkpoints ------------------------------------------------------------


def network_to_dict(net: Network, epoch: int = 0) -> dict:
    return {
        "layer_dims": list(net.layer_dims),
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
        "seed": net.seed,
        "epoch": epoch,
    }


def network_from_dict(doc) -> Network:
    return Network(
        tuple(doc["layer_dims"]),
        [np.array(w, dtype=np.float64) for w in doc["weights"]],
        [np.array(b, dtype=np.float64) for b in doc["biases"]],
        int(doc.get("seed", 0)),
    )


def save_network(net: Network, path, epoch: int = 0) -> None:
    Path(path).write_text(json.dumps(network_to_dict(net, epoch)) + "\n")


def load_network(path) -> tuple[Network, int]:
    doc = json.loads(Path(path).read_text())
    return network_from_dict(doc), int(doc.get("epoch", 0))
