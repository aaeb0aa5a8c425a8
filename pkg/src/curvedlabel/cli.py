"""Command-line interface.

Exit codes: 0 success, 1 invalid input or configuration, 2 numerical or
runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .confusion import MetricConfig, load_confusion_csv
from .datagen import HierarchySpec, generate, save_csv
from .errors import ConfigError
from .harness import ExperimentConfig, extreme_pairs, metric_report, run_compare, run_train
from .losses import LOSS_NAMES
from .metric import distance_report, format_matrix_csv, load_metric

log = logging.getLogger("curvedlabel")

_DATA_FLAGS = {
    "n_super": int,
    "per_super": int,
    "d": int,
    "super_sep": float,
    "sub_sep": float,
    "noise_sigma": float,
    "n_per_class": int,
    "data_seed": int,
}


def _add_data_flags(p):
    g = p.add_argument_group("synthetic data")
    for name, typ in _DATA_FLAGS.items():
        g.add_argument("--" + name.replace("_", "-"), type=typ, default=None)


def _add_metric_flags(p, suffix=""):
    tag = f"-{suffix}" if suffix else ""
    p.add_argument(f"--scale{tag}", type=float, default=None, help="metric scale A")
    p.add_argument(f"--smoothing{tag}", f"--lambda{tag}", type=float, default=None,
                   dest=f"smoothing{'_' + suffix if suffix else ''}", help="EMA factor")
    p.add_argument(f"--clamp-max{tag}", type=float, default=None)
    p.add_argument(f"--cadence{tag}", choices=("epoch", "batch"), default=None)


def _add_experiment_flags(p):
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--data-csv")
    p.add_argument("--csv-header", action="store_true", default=None)
    p.add_argument("--train-frac", type=float)
    p.add_argument("--split-seed", type=int)
    p.add_argument("--hidden", help="comma-separated hidden widths, e.g. 32 or 64,32")
    p.add_argument("--lr", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--output-dir")
    _add_data_flags(p)


def _base_dict(args) -> dict:
    doc = ExperimentConfig().to_dict()
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: {exc}") from None
        for key in ("data", "metric"):
            if isinstance(loaded.get(key), dict):
                doc[key].update(loaded.pop(key))
        doc.update(loaded)
    for key in ("data_csv", "csv_header", "train_frac", "split_seed", "lr", "momentum",
                "epochs", "batch_size", "seed", "output_dir"):
        val = getattr(args, key, None)
        if val is not None:
            doc[key] = val
    if getattr(args, "hidden", None):
        try:
            doc["hidden"] = [int(h) for h in args.hidden.split(",") if h.strip()]
        except ValueError:
            raise ConfigError(f"bad --hidden {args.hidden!r}") from None
    for name in _DATA_FLAGS:
        val = getattr(args, name, None)
        if val is not None:
            doc["data"]["seed" if name == "data_seed" else name] = val
    return doc


def _metric_overrides(args, doc, suffix=""):
    sfx = f"_{suffix}" if suffix else ""
    metric = dict(doc["metric"])
    for key in ("scale", "smoothing", "clamp_max", "cadence"):
        val = getattr(args, key + sfx, None)
        if val is not None:
            metric[key] = val
    return metric


def cmd_train(args) -> int:
    doc = _base_dict(args)
    doc["metric"] = _metric_overrides(args, doc)
    if args.loss:
        doc["loss"] = args.loss
    if not doc.get("output_dir"):
        doc["output_dir"] = f"runs/{doc['loss']}_seed{doc['seed']}"
    cfg = ExperimentConfig.from_dict(doc)
    result = run_train(cfg, resume_from=args.resume)
    print((result.run_dir / "summary.txt").read_text(), end="")
    return 0


def cmd_compare(args) -> int:
    doc = _base_dict(args)
    doc["metric"] = _metric_overrides(args, doc)
    out = doc.pop("output_dir", None)
    cfgs = []
    for side in ("a", "b"):
        d = dict(doc, loss=getattr(args, f"loss_{side}"), output_dir=None)
        d["metric"] = _metric_overrides(args, doc, side)
        cfgs.append(ExperimentConfig.from_dict(d))
    report = run_compare(cfgs[0], cfgs[1], n_seeds=args.n_seeds, output_dir=out)
    print(f"a = {report['loss_a']}  b = {report['loss_b']}")
    for row in report["runs"]:
        print(f"seed {row['seed']}: acc_a {row['acc_a']:.4f}  acc_b {row['acc_b']:.4f}  "
              f"delta {row['delta']:+.4f}")
    s = report["signs"]
    print(f"mean delta {report['mean_delta']:+.4f}  "
          f"(b better {s['b_better']}, a better {s['a_better']}, tied {s['tied']})")
    return 0


def cmd_metric_report(args) -> int:
    counts = load_confusion_csv(args.confusion_csv)
    cfg = MetricConfig(**_metric_overrides(args, {"metric": {}}))
    rep = metric_report(counts, cfg, output_dir=args.output_dir)
    print(format_matrix_csv(rep["distances"]), end="")
    print("largest cross-class distances:")
    for a, b, v in rep["largest"]:
        print(f"  {a} - {b}: {v:.6f}")
    print("smallest cross-class distances:")
    for a, b, v in rep["smallest"]:
        print(f"  {a} - {b}: {v:.6f}")
    return 0


def cmd_distance_table(args) -> int:
    m = load_metric(args.metric)
    table = distance_report(m)
    text = format_matrix_csv(table)
    if args.output:
        Path(args.output).write_text(text)
    print(text, end="")
    largest, smallest = extreme_pairs(table)
    print("largest: " + ", ".join(f"{a}-{b} {v:.4f}" for a, b, v in largest))
    print("smallest: " + ", ".join(f"{a}-{b} {v:.4f}" for a, b, v in smallest))
    return 0


def cmd_gen_data(args) -> int:
    spec_doc = HierarchySpec().to_dict()
    for name in _DATA_FLAGS:
        val = getattr(args, name)
        if val is not None:
            spec_doc["seed" if name == "data_seed" else name] = val
    spec = HierarchySpec(**spec_doc)
    ds = generate(spec)
    save_csv(ds, args.output)
    if args.superclass_out:
        Path(args.superclass_out).write_text(
            json.dumps({"k": ds.k, "superclass_of": ds.superclass_of.tolist()}) + "\n"
        )
    print(f"wrote {ds.n} examples, k={ds.k}, d={ds.d} to {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="curvedlabel", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one network")
    _add_experiment_flags(p)
    _add_metric_flags(p)
    p.add_argument("--loss", choices=LOSS_NAMES)
    p.add_argument("--resume", help="checkpoint file to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="paired runs of two loss settings")
    _add_experiment_flags(p)
    _add_metric_flags(p)
    for side in ("a", "b"):
        p.add_argument(f"--loss-{side}", choices=LOSS_NAMES, required=True)
        _add_metric_flags(p, side)
    p.add_argument("--n-seeds", type=int, default=5)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("metric-report", help="metric from an external confusion matrix")
    p.add_argument("confusion_csv")
    _add_metric_flags(p)
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_metric_report)

    p = sub.add_parser("distance-table", help="pairwise class distances of a metric file")
    p.add_argument("metric", help="metric .csv or .json")
    p.add_argument("--output")
    p.set_defaults(func=cmd_distance_table)

    p = sub.add_parser("gen-data", help="write a synthetic hierarchical dataset as CSV")
    _add_data_flags(p)
    p.add_argument("--output", required=True)
    p.add_argument("--superclass-out")
    p.set_defaults(func=cmd_gen_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, IndexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ArithmeticError, RuntimeError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
