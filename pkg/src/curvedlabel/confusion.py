"""Confusion statistics and the metric derived from them.

Pipeline: raw counts ``C`` (rows = true class, columns = predicted class)
-> ``P``, each column divided by the number of examples predicted as that
class -> exponential moving average ``Pbar`` across epochs -> effective
distance ``S = 1 - (Pbar + Pbar.T) / 2`` -> metric with off-diagonal
``scale * S``.

The EMA is started unnormalised, ``Pbar(0) = smoothing * P(0)``, so early
metrics stay close to the all-ones off-diagonal of a perfect classifier.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DataParseError, DimensionError, MetricNotReadyError
from .metric import Metric

CADENCES = ("epoch", "batch")


@dataclass(frozen=True)
class MetricConfig:
    scale: float = 1.0
    smoothing: float = 0.3
    clamp_max: float | None = None
    cadence: str = "epoch"

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if not 0 < self.smoothing <= 1:
            raise ValueError(f"smoothing must be in (0, 1], got {self.smoothing}")
        if self.clamp_max is not None and self.clamp_max < 0:
            raise ValueError(f"clamp_max must be non-negative, got {self.clamp_max}")
        if self.cadence not in CADENCES:
            raise ValueError(f"cadence must be one of {CADENCES}, got {self.cadence!r}")


class ConfusionAccumulator:
    """Mutable count matrix. Single writer."""

    def __init__(self, k: int):
        if k < 2:
            raise DimensionError(f"class count must be >= 2, got {k}")
        self.k = int(k)
        self.counts = np.zeros((self.k, self.k), dtype=np.int64)

    @classmethod
    def from_counts(cls, counts) -> "ConfusionAccumulator":
        counts = np.asarray(counts)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise DimensionError(f"confusion matrix must be square, got {counts.shape}")
        if np.any(counts < 0):
            raise ValueError("confusion counts must be non-negative")
        if not np.all(counts == np.round(counts)):
            raise ValueError("confusion counts must be integers")
        acc = cls(counts.shape[0])
        acc.counts[...] = counts.astype(np.int64)
        return acc

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def record(self, true_class: int, predicted_class: int) -> "ConfusionAccumulator":
        for idx in (true_class, predicted_class):
            if not 0 <= idx < self.k:
                raise IndexError(f"class index {idx} out of range for k={self.k}")
        self.counts[true_class, predicted_class] += 1
        return self

    def record_batch(self, true, pred) -> "ConfusionAccumulator":
        self.counts += kernels.confusion_counts(true, pred, self.k)
        return self

    def reset(self) -> None:
        self.counts[...] = 0

    def snapshot(self) -> np.ndarray:
        return self.counts.copy()


def normalize(counts) -> np.ndarray:
    """Divide each column by its total; empty columns become all-zero."""
    if isinstance(counts, ConfusionAccumulator):
        counts = counts.counts
    c = np.asarray(counts, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise DimensionError(f"confusion matrix must be square, got {c.shape}")
    col = c.sum(axis=0)
    p = np.zeros_like(c)
    nz = col > 0
    p[:, nz] = c[:, nz] / col[nz]
    return p


@dataclass(frozen=True, eq=False)
class EmaState:
    k: int
    smoothing: float
    pbar: np.ndarray
    t: int = 0

    @classmethod
    def empty(cls, k: int, smoothing: float) -> "EmaState":
        return cls(k, smoothing, np.zeros((k, k)), 0)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "lambda": self.smoothing,
            "t": self.t,
            "pbar": self.pbar.tolist(),
        }

    @classmethod
    def from_dict(cls, doc) -> "EmaState":
        pbar = np.array(doc["pbar"], dtype=np.float64).reshape(doc["k"], doc["k"])
        return cls(int(doc["k"]), float(doc["lambda"]), pbar, int(doc["t"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "EmaState":
        return cls.from_dict(json.loads(Path(path).read_text()))


def ema_update(state: EmaState, p) -> EmaState:
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (state.k, state.k):
        raise DimensionError(f"expected {state.k}x{state.k} matrix, got {p.shape}")
    lam = state.smoothing
    if state.t == 0:
        pbar = lam * p
    else:
        pbar = (1.0 - lam) * state.pbar + lam * p
    return EmaState(state.k, lam, pbar, state.t + 1)


def effective_distance(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise DimensionError(f"expected a square matrix, got {p.shape}")
    return 1.0 - 0.5 * (p + p.T)


def build_metric(s, cfg: MetricConfig) -> Metric:
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionError(f"expected a square matrix, got {s.shape}")
    if not np.array_equal(s, s.T):
        raise ValueError("effective distance matrix is not symmetric")
    if np.any(s < 0) or np.any(s > 1):
        raise ValueError("effective distances must lie in [0, 1]")
    g = cfg.scale * s
    if cfg.clamp_max is not None:
        g = np.minimum(g, cfg.clamp_max)
    np.fill_diagonal(g, 1.0)
    return Metric(g, provenance={"source": "confusion", "scale": cfg.scale})


def metric_from_history(state: EmaState, cfg: MetricConfig) -> Metric:
    if state.t < 1:
        raise MetricNotReadyError("no confusion statistics yet; use the identity metric")
    return build_metric(effective_distance(state.pbar), cfg)


def load_confusion_csv(path) -> np.ndarray:
    """Read a ``k x k`` integer confusion matrix (rows = true class)."""
    from .datagen import parse_csv_rows

    rows = parse_csv_rows(Path(path).read_text(), int)
    if not rows:
        raise DataParseError(f"{path}: empty confusion matrix")
    k = len(rows)
    for i, row in enumerate(rows, start=1):
        if len(row) != k:
            raise DimensionError(f"{path}: line {i} has {len(row)} entries, expected {k}")
        if any(v < 0 for v in row):
            raise DataParseError("negative count", line=i)
    return np.array(rows, dtype=np.int64)
