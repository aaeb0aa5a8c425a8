# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batched kernels. See ``_pykernels`` for the reference versions."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, log
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

ctypedef cnp.int64_t i64


def mse_batch(const i64[::1] labels, const double[:, ::1] probs):
    cdef Py_ssize_t n = probs.shape[0], k = probs.shape[1], i, a
    cdef double diff, acc
    loss_arr = np.empty(n)
    grad_arr = np.empty((n, k))
    cdef double[::1] loss = loss_arr
    cdef double[:, ::1] grad = grad_arr
    for i in range(n):
        acc = 0.0
        for a in range(k):
            diff = probs[i, a] - (1.0 if a == labels[i] else 0.0)
            acc += diff * diff
            grad[i, a] = 2.0 * diff
        loss[i] = acc
    return loss_arr, grad_arr


def ce_batch(const i64[::1] labels, const double[:, ::1] probs, double eps):
    cdef Py_ssize_t n = probs.shape[0], k = probs.shape[1], i, c
    cdef double pc
    loss_arr = np.empty(n)
    grad_arr = np.zeros((n, k))
    clamped_arr = np.zeros(n, dtype=bool)
    cdef double[::1] loss = loss_arr
    cdef double[:, ::1] grad = grad_arr
    cdef cnp.npy_bool[::1] clamped = clamped_arr
    for i in range(n):
        c = labels[i]
        pc = probs[i, c]
        if pc <= eps:
            clamped[i] = True
            loss[i] = -log(eps)
        else:
            loss[i] = -log(pc)
            grad[i, c] = -1.0 / pc
    return loss_arr, grad_arr, clamped_arr


def cqe_batch(const double[:, ::1] g, const i64[::1] labels, const double[:, ::1] probs):
    cdef Py_ssize_t n = probs.shape[0], k = probs.shape[1], i, a
    cdef double acc, diff
    loss_arr = np.empty(n)
    grad_arr = np.empty((n, k))
    if n == 0:
        return loss_arr, grad_arr
    cdef double[::1] loss = loss_arr
    cdef double[:, ::1] grad = grad_arr
    cdef double[:, ::1] d = np.empty((n, k))
    cdef double[:, ::1] gd = np.empty((n, k))
    cdef signed char[:, ::1] sgn = np.empty((n, k), dtype=np.int8)
    cdef int m = <int>k, nn = <int>n
    cdef double one = 1.0, zero = 0.0
    for i in range(n):
        for a in range(k):
            diff = probs[i, a] - (1.0 if a == labels[i] else 0.0)
            d[i, a] = fabs(diff)
            sgn[i, a] = (diff > 0) - (diff < 0)
    # row-major gd = d @ g is column-major gd.T = g.T @ d.T
    dgemm(b"N", b"N", &m, &nn, &m, &one, <double*>&g[0, 0], &m, &d[0, 0], &m,
          &zero, &gd[0, 0], &m)
    for i in range(n):
        acc = 0.0
        for a in range(k):
            acc += d[i, a] * gd[i, a]
            grad[i, a] = 2.0 * sgn[i, a] * gd[i, a]
        loss[i] = acc
    return loss_arr, grad_arr


def cce_batch(const double[:, ::1] g, const i64[::1] labels, const double[:, ::1] probs,
              double eps):
    cdef Py_ssize_t n = probs.shape[0], k = probs.shape[1], i, b, c
    cdef double arg
    loss_arr = np.empty(n)
    grad_arr = np.zeros((n, k))
    clamped_arr = np.zeros(n, dtype=bool)
    cdef double[::1] loss = loss_arr
    cdef double[:, ::1] grad = grad_arr
    cdef cnp.npy_bool[::1] clamped = clamped_arr
    for i in range(n):
        c = labels[i]
        arg = 0.0
        for b in range(k):
            arg += g[c, b] * probs[i, b]
        if arg <= eps:
            clamped[i] = True
            loss[i] = -log(eps)
        else:
            loss[i] = -log(arg)
            for b in range(k):
                grad[i, b] = -g[c, b] / arg
    return loss_arr, grad_arr, clamped_arr


def softmax_backward(const double[:, ::1] probs, const double[:, ::1] grad_probs):
    cdef Py_ssize_t n = probs.shape[0], k = probs.shape[1], i, a
    cdef double inner
    out_arr = np.empty((n, k))
    cdef double[:, ::1] out = out_arr
    for i in range(n):
        inner = 0.0
        for a in range(k):
            inner += probs[i, a] * grad_probs[i, a]
        for a in range(k):
            out[i, a] = probs[i, a] * (grad_probs[i, a] - inner)
    return out_arr


def confusion_counts(const i64[::1] true, const i64[::1] pred, Py_ssize_t k):
    cdef Py_ssize_t n = true.shape[0], i
    counts_arr = np.zeros((k, k), dtype=np.int64)
    cdef i64[:, ::1] counts = counts_arr
    for i in range(n):
        counts[true[i], pred[i]] += 1
    return counts_arr
