"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 20]

Times each batched kernel on random inputs, then one full training run with
each backend swapped in.
"""

import argparse
import time

import numpy as np

from curvedlabel import kernels
from curvedlabel.datagen import HierarchySpec
from curvedlabel.harness import ExperimentConfig, run_train


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        tic = time.perf_counter()
        fn()
        times.append(time.perf_counter() - tic)
    return min(times)


def kernel_cases(n, k, rng):
    a = rng.uniform(size=(k, k))
    g = np.triu(a, 1) + np.triu(a, 1).T
    np.fill_diagonal(g, 1.0)
    labels = rng.integers(0, k, size=n)
    probs = rng.dirichlet(np.ones(k), size=n)
    up = rng.normal(size=(n, k))
    pred = rng.integers(0, k, size=n)
    return {
        "cqe_batch": lambda impl: kernels.cqe_batch(g, labels, probs, impl=impl),
        "cce_batch": lambda impl: kernels.cce_batch(g, labels, probs, 1e-12, impl=impl),
        "ce_batch": lambda impl: kernels.ce_batch(labels, probs, 1e-12, impl=impl),
        "softmax_backward": lambda impl: kernels.softmax_backward(probs, up, impl=impl),
        "confusion_counts": lambda impl: kernels.confusion_counts(labels, pred, k, impl=impl),
    }


def train_time(loss, backend):
    saved = kernels.backend
    kernels.backend = backend
    try:
        cfg = ExperimentConfig(data=HierarchySpec(n_per_class=500), loss=loss, epochs=10,
                               batch_size=32)
        tic = time.perf_counter()
        res = run_train(cfg)
        return time.perf_counter() - tic, res.final_accuracy
    finally:
        kernels.backend = saved


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()
    if kernels.compiled_backend is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e .` first")
    backends = {"python": kernels.python_backend, "compiled": kernels.compiled_backend}
    rng = np.random.default_rng(0)

    print(f"{'kernel':<18}{'n':>7}{'k':>5}{'python ms':>12}{'compiled ms':>13}{'speedup':>9}")
    for n, k in [(32, 4), (32, 100), (4096, 10), (4096, 100)]:
        for name, fn in kernel_cases(n, k, rng).items():
            t = {b: best_of(lambda: fn(impl), args.repeat) for b, impl in backends.items()}
            print(f"{name:<18}{n:>7}{k:>5}{t['python'] * 1e3:>12.4f}{t['compiled'] * 1e3:>13.4f}"
                  f"{t['python'] / t['compiled']:>8.1f}x")

    print()
    print(f"{'training (10 epochs)':<22}{'python s':>10}{'compiled s':>12}{'acc py':>8}{'acc c':>8}")
    for loss in ("ce", "cqe", "cce"):
        (tp, ap), (tc, ac) = train_time(loss, backends["python"]), train_time(loss, backends["compiled"])
        print(f"{loss:<22}{tp:>10.3f}{tc:>12.3f}{ap:>8.4f}{ac:>8.4f}")


if __name__ == "__main__":
    main()
