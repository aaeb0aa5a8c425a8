"""Flat and curved classification losses with gradients w.r.t. the output.

Per-example functions take the true class index ``c``, the predicted
probability vector ``yhat`` and, for the curved losses, a :class:`Metric`.
Gradients are ``dL/dyhat`` (post-softmax); the network composes them with the
softmax Jacobian itself.

Curved quadratic error is exactly the curved squared distance between the
one-hot target and ``yhat``. Curved cross-entropy is
``-log(sum_b g[c, b] * yhat_b)``. Both reduce to their flat counterparts
under the identity metric.

With a metric scale above 1 the CCE log argument can exceed 1 and the loss
goes negative. That is allowed.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import DimensionError
from .metric import Metric, check_prob_vector, curved_sq_distance, one_hot

EPS = 1e-12

LOSS_NAMES = ("mse", "ce", "cqe", "cce")
CURVED = frozenset({"cqe", "cce"})


def _args(c, yhat, k=None):
    yhat = check_prob_vector(yhat, k)
    if int(c) != c or not 0 <= c < yhat.shape[0]:
        raise IndexError(f"class index {c} out of range for k={yhat.shape[0]}")
    return int(c), yhat


def _metric_args(m: Metric, c, yhat):
    yhat = np.asarray(yhat, dtype=np.float64)
    if yhat.ndim != 1 or yhat.shape[0] != m.k:
        raise DimensionError(f"output has shape {yhat.shape}, metric has k={m.k}")
    return _args(c, yhat, m.k)


def mse(c, yhat) -> float:
    c, yhat = _args(c, yhat)
    diff = yhat - one_hot(c, yhat.shape[0])
    return float(diff @ diff)


def crossentropy(c, yhat) -> float:
    c, yhat = _args(c, yhat)
    return float(-np.log(max(yhat[c], EPS)))


def cqe(m: Metric, c, yhat) -> float:
    c, yhat = _metric_args(m, c, yhat)
    return curved_sq_distance(m, one_hot(c, m.k), yhat)


def cce(m: Metric, c, yhat) -> float:
    c, yhat = _metric_args(m, c, yhat)
    return float(-np.log(max(m.g[c] @ yhat, EPS)))


def mse_grad(c, yhat) -> np.ndarray:
    c, yhat = _args(c, yhat)
    return 2.0 * (yhat - one_hot(c, yhat.shape[0]))


def crossentropy_grad(c, yhat) -> np.ndarray:
    c, yhat = _args(c, yhat)
    grad = np.zeros_like(yhat)
    if yhat[c] > EPS:
        grad[c] = -1.0 / yhat[c]
    return grad


def cqe_grad(m: Metric, c, yhat) -> np.ndarray:
    """Subgradient with ``sign(0) = 0`` at coordinates where ``yhat`` hits the target."""
    c, yhat = _metric_args(m, c, yhat)
    diff = yhat - one_hot(c, m.k)
    return 2.0 * np.sign(diff) * (m.g @ np.abs(diff))


def cce_grad(m: Metric, c, yhat, return_clamped: bool = False):
    """Gradient of CCE. In the clamped region the gradient is the zero vector.

    With ``return_clamped=True`` returns ``(grad, clamped)``.
    """
    c, yhat = _metric_args(m, c, yhat)
    arg = m.g[c] @ yhat
    clamped = bool(arg <= EPS)
    grad = np.zeros(m.k) if clamped else -m.g[c] / arg
    return (grad, clamped) if return_clamped else grad


class BatchLoss(NamedTuple):
    """Per-example losses and gradients for one batch.

    ``grads[i]`` is the gradient of example ``i``'s own loss; the mean-loss
    gradient is ``grads / n``.
    """

    losses: np.ndarray
    grads: np.ndarray
    clamped: np.ndarray

    @property
    def mean(self) -> float:
        return float(self.losses.mean())


def batch_loss(name: str, labels, probs, metric: Metric | None = None, impl=None) -> BatchLoss:
    """Evaluate loss ``name`` over a batch using the selected kernel backend."""
    if name not in LOSS_NAMES:
        raise ValueError(f"unknown loss {name!r}; expected one of {LOSS_NAMES}")
    if name in CURVED and metric is None:
        raise ValueError(f"{name} needs a metric")
    n = np.shape(labels)[0]
    no_clamp = np.zeros(n, dtype=bool)
    if name == "mse":
        losses, grads = kernels.mse_batch(labels, probs, impl=impl)
        return BatchLoss(losses, grads, no_clamp)
    if name == "ce":
        return BatchLoss(*kernels.ce_batch(labels, probs, EPS, impl=impl))
    if name == "cqe":
        losses, grads = kernels.cqe_batch(metric.g, labels, probs, impl=impl)
        return BatchLoss(losses, grads, no_clamp)
    return BatchLoss(*kernels.cce_batch(metric.g, labels, probs, EPS, impl=impl))
