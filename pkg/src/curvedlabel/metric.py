"""Metric tensor over class labels and label-space distances.

A :class:`Metric` is a symmetric, non-negative ``k x k`` matrix with a unit
diagonal. It is used only as a constant bilinear form on the absolute
difference between two label-space vectors::

    d^2(y, yhat) = sum_ab g[a, b] * |yhat_a - y_a| * |yhat_b - y_b|

With ``g`` the identity this is the squared Euclidean distance. Between two
distinct one-hot vectors it evaluates to ``2 * (1 + g[a, b])``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, MetricValidationError

log = logging.getLogger(__name__)

FILE_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class Metric:
    """Label-space metric tensor.

    ``g`` is copied and made read-only on construction. Symmetry and the unit
    diagonal are checked for exact equality; use :func:`load_metric` for
    values that went through a text file.

    The smallest eigenvalue is computed for diagnostics only. A metric that
    is not positive semidefinite is accepted.
    """

    g: np.ndarray
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        g = np.array(self.g, dtype=np.float64, copy=True)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise DimensionError(f"metric must be square, got shape {g.shape}")
        if g.shape[0] < 2:
            raise DimensionError(f"metric needs at least 2 classes, got {g.shape[0]}")
        if not np.all(np.isfinite(g)):
            raise MetricValidationError("metric has non-finite entries")
        if not np.array_equal(g, g.T):
            raise MetricValidationError("metric is not symmetric")
        if not np.all(np.diag(g) == 1.0):
            raise MetricValidationError("metric diagonal must be exactly 1")
        if np.any(g < 0):
            raise MetricValidationError("metric has negative entries")
        g.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "provenance", dict(self.provenance))
        if self.min_eigenvalue < 0:
            log.debug("metric is indefinite (min eigenvalue %.3g)", self.min_eigenvalue)

    @property
    def k(self) -> int:
        return self.g.shape[0]

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.g)[0])

    def off_diagonal(self) -> np.ndarray:
        """Upper-triangle off-diagonal entries, row-major."""
        iu = np.triu_indices(self.k, 1)
        return self.g[iu]

    def summary(self) -> dict:
        off = self.off_diagonal()
        return {
            "min": float(off.min()),
            "mean": float(off.mean()),
            "max": float(off.max()),
        }

    def __eq__(self, other):
        if not isinstance(other, Metric):
            return NotImplemented
        return np.array_equal(self.g, other.g)

    __hash__ = None


def identity_metric(k: int) -> Metric:
    """Flat label space on ``k`` classes."""
    if int(k) != k or k < 2:
        raise DimensionError(f"class count must be an integer >= 2, got {k}")
    return Metric(np.eye(int(k)), provenance={"source": "identity"})


def one_hot(index: int, k: int) -> np.ndarray:
    if not 0 <= index < k:
        raise IndexError(f"class index {index} out of range for k={k}")
    v = np.zeros(k)
    v[index] = 1.0
    return v


def check_prob_vector(p, k: int | None = None, tol: float = 1e-9) -> np.ndarray:
    """Return ``p`` as a float array after checking it lies on the simplex."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise DimensionError(f"probability vector must be 1-d, got shape {p.shape}")
    if k is not None and p.shape[0] != k:
        raise DimensionError(f"expected length {k}, got {p.shape[0]}")
    if np.any(p < 0) or np.any(p > 1) or abs(p.sum() - 1.0) > tol:
        raise ValueError("not a probability vector")
    return p


def _pair(y, yhat):
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.ndim != 1 or y.shape != yhat.shape:
        raise DimensionError(f"vector shapes differ: {y.shape} vs {yhat.shape}")
    return y, yhat


def euclidean_sq_distance(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    diff = yhat - y
    return float(diff @ diff)


def curved_sq_distance(m: Metric, y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    if y.shape[0] != m.k:
        raise DimensionError(f"vectors have length {y.shape[0]}, metric has k={m.k}")
    d = np.abs(yhat - y)
    return float(d @ m.g @ d)


def class_pair_sq_distance(m: Metric, a: int, b: int) -> float:
    for idx in (a, b):
        if not 0 <= idx < m.k:
            raise IndexError(f"class index {idx} out of range for k={m.k}")
    if a == b:
        return 0.0
    return 2.0 * (1.0 + float(m.g[a, b]))


def distance_report(m: Metric) -> np.ndarray:
    """Pairwise class distances ``sqrt(2 (1 + g_ab))`` with a zero diagonal."""
    table = np.sqrt(2.0 * (1.0 + m.g))
    np.fill_diagonal(table, 0.0)
    return table


# --- file formats -----------------------------------------------------------


def format_matrix_csv(a: np.ndarray, integer: bool = False) -> str:
    fmt = "{:d}" if integer else "{!r}"
    rows = []
    for row in np.asarray(a):
        rows.append(",".join(fmt.format(int(v) if integer else float(v)) for v in row))
    return "\n".join(rows) + "\n"


def save_metric_csv(m: Metric, path) -> None:
    Path(path).write_text(format_matrix_csv(m.g))


def save_metric_json(m: Metric, path) -> None:
    doc = {"k": m.k, "g": m.g.tolist(), "provenance": m.provenance}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def read_float_matrix(path) -> np.ndarray:
    from .datagen import parse_csv_rows

    rows = parse_csv_rows(Path(path).read_text(), float)
    if not rows:
        raise DimensionError(f"{path}: empty matrix file")
    return np.array(rows, dtype=np.float64)


def metric_from_array(g, provenance=None, tol: float = FILE_TOLERANCE) -> Metric:
    """Build a metric from measured values, tolerating float noise up to ``tol``.

    Asymmetry and diagonal deviations within ``tol`` are snapped away;
    larger ones are rejected.
    """
    g = np.array(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise DimensionError(f"metric must be square, got shape {g.shape}")
    if np.max(np.abs(g - g.T)) > tol:
        raise MetricValidationError("metric is not symmetric within tolerance")
    if np.max(np.abs(np.diag(g) - 1.0)) > tol:
        raise MetricValidationError("metric diagonal is not 1 within tolerance")
    g = 0.5 * (g + g.T)
    np.fill_diagonal(g, 1.0)
    return Metric(g, provenance=provenance or {})


def load_metric(path) -> Metric:
    """Read a metric from ``.json`` (structured) or anything else as CSV."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        doc = json.loads(path.read_text())
        g = np.array(doc["g"], dtype=np.float64)
        if "k" in doc and g.shape != (doc["k"], doc["k"]):
            raise DimensionError(f"{path}: k={doc['k']} but g has shape {g.shape}")
        return metric_from_array(g, provenance=doc.get("provenance"))
    return metric_from_array(read_float_matrix(path), provenance={"source": str(path)})
