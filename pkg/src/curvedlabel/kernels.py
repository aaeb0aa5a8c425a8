"""Backend selection for the batched loss and confusion kernels.

The compiled ``_ckernels`` module is used when it imports; otherwise the numpy
versions in ``_pykernels``. Set ``CURVEDLABEL_BACKEND=python`` to force the
fallback. Inputs are validated here so both backends see clean arrays.
"""

import os

import numpy as np

from . import _pykernels
from .errors import DimensionError

python_backend = _pykernels

try:
    from . import _ckernels as compiled_backend
except ImportError:  # pragma: no cover - depends on the build
    compiled_backend = None

if os.environ.get("CURVEDLABEL_BACKEND", "").lower() == "python" or compiled_backend is None:
    backend = python_backend
else:
    backend = compiled_backend

BACKEND_NAME = "compiled" if backend is compiled_backend else "python"


def _prep(labels, probs, k=None):
    probs = np.ascontiguousarray(probs, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if probs.ndim != 2 or labels.ndim != 1 or labels.shape[0] != probs.shape[0]:
        raise DimensionError(f"labels {labels.shape} do not match outputs {probs.shape}")
    if k is not None and probs.shape[1] != k:
        raise DimensionError(f"outputs have {probs.shape[1]} classes, metric has {k}")
    if labels.size and (labels.min() < 0 or labels.max() >= probs.shape[1]):
        raise IndexError("label out of range")
    return labels, probs


def mse_batch(labels, probs, impl=None):
    labels, probs = _prep(labels, probs)
    return (impl or backend).mse_batch(labels, probs)


def ce_batch(labels, probs, eps, impl=None):
    labels, probs = _prep(labels, probs)
    return (impl or backend).ce_batch(labels, probs, float(eps))


def cqe_batch(g, labels, probs, impl=None):
    g = np.ascontiguousarray(g, dtype=np.float64)
    labels, probs = _prep(labels, probs, g.shape[0])
    return (impl or backend).cqe_batch(g, labels, probs)


def cce_batch(g, labels, probs, eps, impl=None):
    g = np.ascontiguousarray(g, dtype=np.float64)
    labels, probs = _prep(labels, probs, g.shape[0])
    return (impl or backend).cce_batch(g, labels, probs, float(eps))


def softmax_backward(probs, grad_probs, impl=None):
    probs = np.ascontiguousarray(probs, dtype=np.float64)
    grad_probs = np.ascontiguousarray(grad_probs, dtype=np.float64)
    if probs.shape != grad_probs.shape:
        raise DimensionError(f"shape mismatch {probs.shape} vs {grad_probs.shape}")
    return (impl or backend).softmax_backward(probs, grad_probs)


def confusion_counts(true, pred, k, impl=None):
    true = np.ascontiguousarray(true, dtype=np.int64)
    pred = np.ascontiguousarray(pred, dtype=np.int64)
    if true.shape != pred.shape or true.ndim != 1:
        raise DimensionError("true and predicted label vectors differ in shape")
    if true.size and (min(true.min(), pred.min()) < 0 or max(true.max(), pred.max()) >= k):
        raise IndexError(f"class index out of range for k={k}")
    return (impl or backend).confusion_counts(true, pred, int(k))
