import numpy as np
import pytest

from conftest import random_metric
from curvedlabel import kernels
from curvedlabel.errors import DimensionError


def _probs(rng, n, k):
    return rng.dirichlet(np.ones(k), size=n)


def test_backend_selected():
    assert kernels.BACKEND_NAME in ("compiled", "python")
    if kernels.compiled_backend is not None:
        assert kernels.backend in (kernels.compiled_backend, kernels.python_backend)


def test_softmax_backward_against_jacobian(backend, rng):
    probs = _probs(rng, 7, 4)
    up = rng.normal(size=(7, 4))
    out = kernels.softmax_backward(probs, up, impl=backend)
    for i in range(7):
        p = probs[i]
        jac = np.diag(p) - np.outer(p, p)
        np.testing.assert_allclose(out[i], jac.T @ up[i], rtol=1e-13, atol=1e-16)


def test_confusion_counts_against_loop(backend, rng):
    true = rng.integers(0, 5, size=300)
    pred = rng.integers(0, 5, size=300)
    expected = np.zeros((5, 5), dtype=np.int64)
    for t, p in zip(true, pred):
        expected[t, p] += 1
    np.testing.assert_array_equal(kernels.confusion_counts(true, pred, 5, impl=backend), expected)


def test_backends_agree(rng):
    if kernels.compiled_backend is None:
        pytest.skip("compiled kernels not built")
    py, cy = kernels.python_backend, kernels.compiled_backend
    g = random_metric(rng, 6, high=2.0).g
    labels = rng.integers(0, 6, size=500)
    probs = _probs(rng, 500, 6)
    probs[:5] = 0.0
    probs[:5, (labels[:5] + 1) % 6] = 1.0
    for fn, args in [
        ("mse_batch", (labels, probs)),
        ("ce_batch", (labels, probs, 1e-12)),
        ("cqe_batch", (g, labels, probs)),
        ("cce_batch", (np.eye(6), labels, probs, 1e-12)),
        ("cce_batch", (g, labels, probs, 1e-12)),
    ]:
        a = getattr(kernels, fn)(*args, impl=py)
        b = getattr(kernels, fn)(*args, impl=cy)
        for x, y in zip(a, b):
            np.testing.assert_allclose(x, y, rtol=1e-13, atol=1e-15)


def test_clamped_flags(backend):
    probs = np.array([[0.0, 1.0], [0.5, 0.5]])
    labels = np.array([0, 0])
    loss, grad, clamped = kernels.cce_batch(np.eye(2), labels, probs, 1e-12, impl=backend)
    assert clamped.tolist() == [True, False]
    np.testing.assert_array_equal(grad[0], [0.0, 0.0])
    assert loss[0] == pytest.approx(-np.log(1e-12))
    _, grad, clamped = kernels.ce_batch(labels, probs, 1e-12, impl=backend)
    assert clamped.tolist() == [True, False]
    np.testing.assert_array_equal(grad[0], [0.0, 0.0])


def test_cqe_sign_zero_at_target(backend):
    probs = np.array([[1.0, 0.0, 0.0]])
    loss, grad = kernels.cqe_batch(np.ones((3, 3)), np.array([0]), probs, impl=backend)
    assert loss[0] == 0.0
    np.testing.assert_array_equal(grad, np.zeros((1, 3)))


def test_input_validation():
    with pytest.raises(DimensionError):
        kernels.mse_batch([0, 1], np.ones((3, 2)) / 2)
    with pytest.raises(IndexError):
        kernels.mse_batch([0, 2], np.ones((2, 2)) / 2)
    with pytest.raises(DimensionError):
        kernels.cqe_batch(np.eye(3), [0], np.ones((1, 2)) / 2)
    with pytest.raises(IndexError):
        kernels.confusion_counts([0, 3], [0, 0], 3)


def test_env_var_forces_python_backend():
    import os
    import subprocess
    import sys

    code = "from curvedlabel import kernels; print(kernels.BACKEND_NAME)"
    env = dict(os.environ, CURVEDLABEL_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
