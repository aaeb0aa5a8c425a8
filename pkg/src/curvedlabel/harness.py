"""Experiment orchestration: training runs, paired comparisons, metric reports.

A training run starts in a flat label space. After every epoch the epoch's
training-set confusion counts are column-normalised and folded into the EMA.
For curved losses the metric is then rebuilt from the EMA and used for the
next epoch. Flat losses keep the identity metric for training, but the
history metric is still computed and exported.

Run directory layout::

    config.json         resolved configuration
    reports.jsonl       one EpochReport per line (deterministic)
    timings.jsonl       wall-clock seconds per epoch (not deterministic)
    checkpoints/        epoch_NNNN.json: network, velocity, EMA state
    metrics/            epoch_NNNN.csv: history metric after epoch NNNN
    network.json, metric.csv, metric.json, ema_state.json,
    confusion.csv, distances.csv, summary.txt
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .confusion import (
    ConfusionAccumulator,
    EmaState,
    MetricConfig,
    build_metric,
    effective_distance,
    ema_update,
    metric_from_history,
    normalize,
)
from .datagen import Dataset, HierarchySpec, check_dims, generate, load_csv, split
from .errors import ConfigError, NonFiniteError
from .losses import CURVED, LOSS_NAMES, batch_loss
from .metric import (
    Metric,
    distance_report,
    format_matrix_csv,
    identity_metric,
    save_metric_csv,
    save_metric_json,
)
from .tinynet import (
    Network,
    TrainState,
    backward,
    forward,
    init,
    network_from_dict,
    network_to_dict,
    save_network,
    sgd_step,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentConfig:
    data: HierarchySpec = field(default_factory=HierarchySpec)
    data_csv: str | None = None
    csv_header: bool = False
    train_frac: float = 0.8
    split_seed: int = 0
    hidden: tuple = (32,)
    loss: str = "ce"
    metric: MetricConfig = field(default_factory=MetricConfig)
    lr: float = 0.05
    momentum: float = 0.9
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    output_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.loss not in LOSS_NAMES:
            raise ConfigError(f"loss must be one of {LOSS_NAMES}, got {self.loss!r}")
        if not 0 < self.train_frac < 1:
            raise ConfigError("train_frac must be in (0, 1)")
        if any(h < 1 for h in self.hidden):
            raise ConfigError("hidden widths must be positive")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        if not 0 <= self.momentum < 1:
            raise ConfigError("momentum must be in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["hidden"] = list(self.hidden)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            if isinstance(doc.get("data"), dict):
                doc["data"] = HierarchySpec(**doc["data"])
            if isinstance(doc.get("metric"), dict):
                doc["metric"] = MetricConfig(**doc["metric"])
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class EpochReport:
    epoch: int
    train_loss: float
    train_accuracy: float
    test_accuracy: float
    confusion: list
    metric: dict
    ema_t: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class RunResult:
    config: ExperimentConfig
    reports: list
    network: Network
    ema: EmaState
    metric: Metric
    last_batch_losses: list
    run_dir: Path | None = None

    @property
    def final_accuracy(self) -> float:
        return self.reports[-1].test_accuracy


def load_data(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    ds = load_csv(cfg.data_csv, header=cfg.csv_header) if cfg.data_csv else generate(cfg.data)
    if ds.k < 2:
        raise ConfigError("dataset must contain at least 2 classes")
    return split(ds, cfg.train_frac, cfg.split_seed)


def accuracy(net: Network, ds: Dataset) -> float:
    return float(np.mean(forward(net, ds.features).argmax(axis=1) == ds.labels))


def _metric_for_epoch(cfg: ExperimentConfig, ema: EmaState, k: int) -> Metric:
    if cfg.loss in CURVED and ema.t >= 1:
        return metric_from_history(ema, cfg.metric)
    return identity_metric(k)


def _history_metric(cfg: ExperimentConfig, ema: EmaState, k: int) -> Metric:
    return metric_from_history(ema, cfg.metric) if ema.t >= 1 else identity_metric(k)


def _checkpoint(state: TrainState, ema: EmaState, next_epoch: int) -> dict:
    return {
        "epoch": next_epoch,
        "network": network_to_dict(state.network, next_epoch),
        "velocity": [v.tolist() for v in state.velocity],
        "ema": ema.to_dict(),
    }


def _restore(doc: dict, seed: int) -> tuple[TrainState, EmaState, int]:
    net = network_from_dict(doc["network"])
    velocity = [np.array(v, dtype=np.float64) for v in doc["velocity"]]
    state = TrainState(net, velocity, int(doc["epoch"]), seed)
    return state, EmaState.from_dict(doc["ema"]), int(doc["epoch"])


def run_train(cfg: ExperimentConfig, resume_from=None) -> RunResult:
    """Train one network; write artifacts when ``cfg.output_dir`` is set."""
    train, test = load_data(cfg)
    k = train.k
    dims = (train.d, *cfg.hidden, k)
    run_dir = Path(cfg.output_dir) if cfg.output_dir else None

    if resume_from is not None:
        state, ema, start = _restore(json.loads(Path(resume_from).read_text()), cfg.seed)
        if state.network.layer_dims != dims:
            raise ConfigError(f"checkpoint has layer_dims {state.network.layer_dims}, config {dims}")
    else:
        state = TrainState(init(dims, cfg.seed), epoch=0, rng_seed=cfg.seed)
        ema = EmaState.empty(k, cfg.metric.smoothing)
        start = 0
    check_dims(train, state.network.d_in)

    reports = []
    if run_dir is not None:
        (run_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
        (run_dir / "metrics").mkdir(exist_ok=True)
        (run_dir / "config.json").write_text(json.dumps(cfg.to_dict(), indent=1) + "\n")
        kept = []
        if resume_from is not None and (run_dir / "reports.jsonl").exists():
            for line in (run_dir / "reports.jsonl").read_text().splitlines():
                if json.loads(line)["epoch"] < start:
                    kept.append(line + "\n")
        (run_dir / "reports.jsonl").write_text("".join(kept))
        (run_dir / "timings.jsonl").write_text("")

    metric = _metric_for_epoch(cfg, ema, k)
    batch_losses = []
    acc = ConfusionAccumulator(k)
    try:
        for epoch in range(start, cfg.epochs):
            tic = time.perf_counter()
            epoch_metric = metric
            acc.reset()
            order = np.random.default_rng([cfg.seed, epoch]).permutation(train.n)
            batch_losses = []
            loss_sum = 0.0
            for lo in range(0, train.n, cfg.batch_size):
                idx = order[lo : lo + cfg.batch_size]
                xb, yb = train.features[idx], train.labels[idx]
                probs, cache = forward(state.network, xb, return_cache=True)
                bl = batch_loss(cfg.loss, yb, probs, metric)
                if not np.all(np.isfinite(bl.losses)):
                    raise NonFiniteError(f"non-finite loss at epoch {epoch}, batch {lo // cfg.batch_size}")
                grads = backward(state.network, xb, bl.grads, cache)
                state = sgd_step(state, grads, cfg.lr, cfg.momentum)
                batch_losses.append(bl.mean)
                loss_sum += float(bl.losses.sum())
                pred = probs.argmax(axis=1)
                acc.record_batch(yb, pred)
                if cfg.metric.cadence == "batch":
                    ema = ema_update(ema, normalize(ConfusionAccumulator(k).record_batch(yb, pred)))
                    # epoch 0 stays flat even under per-batch cadence
                    if epoch > 0:
                        metric = _metric_for_epoch(cfg, ema, k)
            if cfg.metric.cadence == "epoch":
                ema = ema_update(ema, normalize(acc))
            metric = _metric_for_epoch(cfg, ema, k)
            state.epoch = epoch + 1

            counts = acc.snapshot()
            report = EpochReport(
                epoch=epoch,
                train_loss=loss_sum / train.n,
                train_accuracy=float(np.trace(counts) / counts.sum()),
                test_accuracy=accuracy(state.network, test),
                confusion=counts.tolist(),
                metric=epoch_metric.summary(),
                ema_t=ema.t,
            )
            reports.append(report)
            if run_dir is not None:
                _write_epoch(run_dir, report, state, ema, cfg, k, time.perf_counter() - tic)
            log.info(
                "epoch %d loss %.4f test acc %.4f", epoch, report.train_loss, report.test_accuracy
            )
    except NonFiniteError as exc:
        if run_dir is not None:
            (run_dir / "summary.txt").write_text(f"status: failed\nerror: {exc}\n")
        raise

    history = _history_metric(cfg, ema, k)
    result = RunResult(cfg, reports, state.network, ema, history, batch_losses, run_dir)
    if run_dir is not None:
        _write_final(run_dir, result, acc.snapshot())
    return result


def _write_epoch(run_dir, report, state, ema, cfg, k, seconds):
    with open(run_dir / "reports.jsonl", "a") as fh:
        fh.write(report.to_json() + "\n")
    with open(run_dir / "timings.jsonl", "a") as fh:
        fh.write(json.dumps({"epoch": report.epoch, "seconds": seconds}) + "\n")
    name = f"epoch_{report.epoch:04d}"
    doc = _checkpoint(state, ema, report.epoch + 1)
    (run_dir / "checkpoints" / f"{name}.json").write_text(json.dumps(doc) + "\n")
    save_metric_csv(_history_metric(cfg, ema, k), run_dir / "metrics" / f"{name}.csv")


def _write_final(run_dir: Path, result: RunResult, counts) -> None:
    save_network(result.network, run_dir / "network.json", epoch=len(result.reports))
    save_metric_csv(result.metric, run_dir / "metric.csv")
    save_metric_json(result.metric, run_dir / "metric.json")
    result.ema.save(run_dir / "ema_state.json")
    (run_dir / "confusion.csv").write_text(format_matrix_csv(counts, integer=True))
    (run_dir / "distances.csv").write_text(format_matrix_csv(distance_report(result.metric)))
    last = result.reports[-1]
    summ = result.metric.summary()
    lines = [
        "status: ok",
        f"loss: {result.config.loss}",
        f"epochs: {len(result.reports)}",
        f"final train loss: {last.train_loss:.6f}",
        f"final test accuracy: {last.test_accuracy:.4f}",
        f"history metric off-diagonal min/mean/max: "
        f"{summ['min']:.6f} / {summ['mean']:.6f} / {summ['max']:.6f}",
    ]
    (run_dir / "summary.txt").write_text("\n".join(lines) + "\n")


# --- comparisons ------------------------------------------------------------

_LOSS_FIELDS = {"loss", "metric", "output_dir", "seed"}


def _check_pair(a: ExperimentConfig, b: ExperimentConfig) -> None:
    da, db = a.to_dict(), b.to_dict()
    diff = sorted(key for key in da if key not in _LOSS_FIELDS and da[key] != db[key])
    if diff:
        raise ConfigError(f"configs differ outside loss settings: {diff}")
    if a.seed != b.seed:
        raise ConfigError("paired configs must share the base seed")


def run_compare(cfg_a: ExperimentConfig, cfg_b: ExperimentConfig, n_seeds: int = 5,
                output_dir=None) -> dict:
    """Paired runs over ``n_seeds`` seeds; deltas are ``b - a`` test accuracies.

    Purely descriptive: no significance test and no verdict.
    """
    _check_pair(cfg_a, cfg_b)
    if n_seeds < 1:
        raise ConfigError("n_seeds must be >= 1")
    out = Path(output_dir) if output_dir else None
    rows = []
    for i in range(n_seeds):
        seed = cfg_a.seed + i
        accs = []
        for tag, cfg in (("a", cfg_a), ("b", cfg_b)):
            sub = str(out / f"seed_{seed}_{tag}") if out else None
            accs.append(run_train(replace(cfg, seed=seed, output_dir=sub)).final_accuracy)
        rows.append({"seed": seed, "acc_a": accs[0], "acc_b": accs[1], "delta": accs[1] - accs[0]})
    deltas = np.array([r["delta"] for r in rows])
    report = {
        "loss_a": cfg_a.loss,
        "loss_b": cfg_b.loss,
        "metric_a": asdict(cfg_a.metric),
        "metric_b": asdict(cfg_b.metric),
        "runs": rows,
        "mean_delta": float(deltas.mean()),
        "signs": {
            "b_better": int((deltas > 0).sum()),
            "a_better": int((deltas < 0).sum()),
            "tied": int((deltas == 0).sum()),
        },
    }
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "compare.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    return report


# --- metric reports ---------------------------------------------------------


def extreme_pairs(table: np.ndarray, n: int = 3) -> tuple[list, list]:
    """The ``n`` largest and ``n`` smallest cross-class entries as ``(a, b, value)``."""
    iu = np.triu_indices(table.shape[0], 1)
    vals = table[iu]
    order = np.argsort(vals, kind="stable")
    pairs = [(int(iu[0][j]), int(iu[1][j]), float(vals[j])) for j in order]
    return pairs[::-1][:n], pairs[:n]


def metric_report(counts, cfg: MetricConfig, output_dir=None) -> dict:
    """Turn an external confusion matrix into P, S, g and a distance table."""
    acc = ConfusionAccumulator.from_counts(counts)
    p = normalize(acc)
    s = effective_distance(p)
    m = build_metric(s, cfg)
    table = distance_report(m)
    largest, smallest = extreme_pairs(table)
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "P.csv").write_text(format_matrix_csv(p))
        (out / "S.csv").write_text(format_matrix_csv(s))
        save_metric_csv(m, out / "metric.csv")
        save_metric_json(m, out / "metric.json")
        (out / "distances.csv").write_text(format_matrix_csv(table))
    return {"P": p, "S": s, "metric": m, "distances": table,
            "largest": largest, "smallest": smallest}
