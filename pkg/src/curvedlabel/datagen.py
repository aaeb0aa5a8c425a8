"""Synthetic hierarchical datasets and CSV feature files.

Generated data has ``n_super`` superclasses whose centers form a regular
simplex with edge ``super_sep``. Each superclass owns ``per_super``
subclasses whose centers sit at distance ``sub_sep`` from it, themselves
arranged as a regular simplex. When the feature dimension allows it, the
subclass offsets live in the orthogonal complement of the superclass span,
so every cross-superclass pair of subclass centers is at least ``super_sep``
apart. Examples are isotropic Gaussian noise around their subclass center.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataParseError, DimensionError, StratificationError


@dataclass(frozen=True)
class HierarchySpec:
    n_super: int = 2
    per_super: int = 2
    d: int = 8
    super_sep: float = 6.0
    sub_sep: float = 1.5
    noise_sigma: float = 1.0
    n_per_class: int = 200
    seed: int = 0

    def __post_init__(self):
        for name in ("n_super", "per_super", "d", "n_per_class"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not self.super_sep > self.sub_sep > 0:
            raise ConfigError("need super_sep > sub_sep > 0")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be non-negative")
        if self.n_super * self.per_super < 2:
            raise ConfigError("need at least 2 classes in total")
        if self.d < self.n_super - 1:
            raise ConfigError(
                f"d={self.d} is too small to embed {self.n_super} superclass centers"
            )

    @property
    def k(self) -> int:
        return self.n_super * self.per_super

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    k: int
    superclass_of: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.k, self.superclass_of)


def _simplex(n: int) -> np.ndarray:
    """``n`` points in ``n - 1`` dims, centered, with unit pairwise distance."""
    if n == 1:
        return np.zeros((1, 0))
    centered = np.eye(n) - 1.0 / n
    _, _, vt = np.linalg.svd(centered)
    return centered @ vt[: n - 1].T / np.sqrt(2.0)


def _rotation(rng, d: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def _centers(spec: HierarchySpec, rng) -> tuple[np.ndarray, np.ndarray]:
    d = spec.d
    basis = _rotation(rng, d)
    n_sup_dims = spec.n_super - 1
    supers = _simplex(spec.n_super) * spec.super_sep
    super_centers = supers @ basis[:, :n_sup_dims].T if n_sup_dims else np.zeros((1, d))

    sub_dims = max(spec.per_super - 1, 1)
    if d - n_sup_dims >= sub_dims:
        complement = basis[:, n_sup_dims:]
    else:
        complement = basis
    sub = _simplex(spec.per_super)
    if spec.per_super == 1:
        sub = np.ones((1, 1))
    sub = sub / np.linalg.norm(sub, axis=1, keepdims=True) * spec.sub_sep

    centers = []
    for s in range(spec.n_super):
        inner = _rotation(rng, complement.shape[1])[:, : sub.shape[1]]
        offsets = sub @ (complement @ inner).T
        centers.append(super_centers[s] + offsets)
    return np.vstack(centers), super_centers


def class_centers(spec: HierarchySpec) -> np.ndarray:
    """Subclass centers used by :func:`generate` for this spec."""
    return _centers(spec, np.random.default_rng(spec.seed))[0]


def generate(spec: HierarchySpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    centers, _ = _centers(spec, rng)
    labels = np.repeat(np.arange(spec.k, dtype=np.int64), spec.n_per_class)
    noise = rng.standard_normal((labels.shape[0], spec.d)) * spec.noise_sigma
    features = centers[labels] + noise
    superclass_of = np.repeat(np.arange(spec.n_super, dtype=np.int64), spec.per_super)
    return Dataset(features, labels, spec.k, superclass_of)


def split(ds: Dataset, train_frac: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified split; every non-empty class lands on both sides."""
    if not 0 < train_frac < 1:
        raise ValueError(f"train_frac must be in (0, 1), got {train_frac}")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for c in range(ds.k):
        idx = np.flatnonzero(ds.labels == c)
        if idx.size == 0:
            continue
        if idx.size < 2:
            raise StratificationError(f"class {c} has a single example")
        idx = rng.permutation(idx)
        n_train = min(max(int(round(train_frac * idx.size)), 1), idx.size - 1)
        train_idx.append(idx[:n_train])
        test_idx.append(idx[n_train:])
    train = np.sort(np.concatenate(train_idx))
    test = np.sort(np.concatenate(test_idx))
    return ds.subset(train), ds.subset(test)


# --- CSV --------------------------------------------------------------------


def parse_csv_rows(text: str, conv=float) -> list[list]:
    """Split comma-separated text into converted rows; blank lines are skipped."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append([conv(field) for field in line.split(",")])
        except ValueError:
            raise DataParseError(f"non-numeric field in {line!r}", line=lineno) from None
    return rows


def load_csv(path, header: bool = False) -> Dataset:
    """Read rows of ``d`` features followed by an integer label."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    features, labels = [], []
    width = None
    for lineno, line in enumerate(lines, start=1):
        if header and lineno == 1:
            continue
        if not line.strip():
            continue
        fields = line.split(",")
        if width is None:
            width = len(fields)
            if width < 2:
                raise DataParseError("need at least one feature and a label", line=lineno)
        elif len(fields) != width:
            raise DataParseError(f"expected {width} fields, got {len(fields)}", line=lineno)
        try:
            row = [float(f) for f in fields[:-1]]
            label = int(fields[-1])
        except ValueError:
            raise DataParseError(f"non-numeric field in {line!r}", line=lineno) from None
        if label < 0:
            raise DataParseError(f"negative label {label}", line=lineno)
        features.append(row)
        labels.append(label)
    if not labels:
        raise DataParseError(f"{path}: no data rows")
    labels = np.array(labels, dtype=np.int64)
    k = int(labels.max()) + 1
    empty = np.flatnonzero(np.bincount(labels, minlength=k) == 0)
    if empty.size:
        warnings.warn(f"{path}: classes {empty.tolist()} have no examples", stacklevel=2)
    return Dataset(np.array(features, dtype=np.float64), labels, k)


def save_csv(ds: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for x, y in zip(ds.features, ds.labels):
            fh.write(",".join(repr(float(v)) for v in x) + f",{int(y)}\n")


def nearest_center_predict(features, centers) -> np.ndarray:
    d2 = ((features[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


def check_dims(ds: Dataset, d_in: int) -> None:
    if ds.d != d_in:
        raise DimensionError(f"dataset has {ds.d} features, network expects {d_in}")
