"""Numpy implementations of the batched kernels.

Same signatures as ``_ckernels``. ``labels`` is an int64 vector of true class
indices, ``probs`` an ``(n, k)`` C-contiguous float64 array.
"""

import numpy as np


def _targets(labels, k):
    y = np.zeros((labels.shape[0], k))
    y[np.arange(labels.shape[0]), labels] = 1.0
    return y


def mse_batch(labels, probs):
    diff = probs - _targets(labels, probs.shape[1])
    return np.einsum("ij,ij->i", diff, diff), 2.0 * diff


def ce_batch(labels, probs, eps):
    n, k = probs.shape
    rows = np.arange(n)
    pc = probs[rows, labels]
    clamped = pc <= eps
    loss = -np.log(np.maximum(pc, eps))
    grad = np.zeros((n, k))
    safe = np.where(clamped, 1.0, pc)
    grad[rows, labels] = np.where(clamped, 0.0, -1.0 / safe)
    return loss, grad, clamped


def cqe_batch(g, labels, probs):
    diff = probs - _targets(labels, probs.shape[1])
    d = np.abs(diff)
    gd = d @ g
    return np.einsum("ij,ij->i", d, gd), 2.0 * np.sign(diff) * gd


def cce_batch(g, labels, probs, eps):
    rows = g[labels]
    arg = np.einsum("ij,ij->i", rows, probs)
    clamped = arg <= eps
    loss = -np.log(np.maximum(arg, eps))
    safe = np.where(clamped, 1.0, arg)
    grad = np.where(clamped[:, None], 0.0, -rows / safe[:, None])
    return loss, grad, clamped


def softmax_backward(probs, grad_probs):
    inner = np.einsum("ij,ij->i", probs, grad_probs)
    return probs * (grad_probs - inner[:, None])


def confusion_counts(true, pred, k):
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (true, pred), 1)
    return counts
