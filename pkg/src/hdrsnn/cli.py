"""Command-line entry point.

Global options go before the subcommand::

    hdrsnn --seed 1 --out runs/a synth
    hdrsnn --out runs/a encode --method pfm --input runs/a/recording.csv
    hdrsnn --config net.json --out runs/b curve --config Base
    hdrsnn --out runs/c ablate --seeds 0 1 2

Every command writes its artifacts under ``--out`` and prints its metrics as
JSON. Failures print ``{"error": ..., "message": ...}`` to stderr and exit
nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import datapipe, harness, learning
from .encoders import AnalogRecording
from .topology import NetworkConfig, build_network

EXIT_USAGE = 2
EXIT_FAILURE = 1


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(out: Path, name: str, text: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def _config(args) -> NetworkConfig:
    if args.config is None:
        return NetworkConfig(seed=args.seed)
    doc = json.loads(Path(args.config).read_text())
    doc.setdefault("seed", args.seed)
    return NetworkConfig.from_dict(doc)


def _recording(args) -> AnalogRecording:
    if args.input is None:
        return datapipe.synth_emg(datapipe.SynthSpec(seed=args.seed))
    rec = AnalogRecording.from_csv(args.input)
    if getattr(args, "labels", None):
        labels = datapipe.labels_from_intervals(args.labels, rec.n_samples, rec.sample_rate)
        rec = AnalogRecording(rec.sample_rate, rec.channels, rec.samples, labels)
    return rec


def _windows(args) -> list:
    if args.windows is not None:
        return datapipe.load_windows(args.windows)
    return datapipe.prepare_corpus(_recording(args), args.method, seed=args.seed)


def _table_csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(str(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _confusion_csv(confusion, names) -> str:
    header = ["true\\pred"] + list(names)
    return _table_csv(header, [[names[i]] + list(row) for i, row in enumerate(confusion)])


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args, out: Path) -> dict:
    spec = datapipe.SynthSpec(trials_per_class=args.trials, amplitude=args.amplitude,
                              gain_range=tuple(args.gain_range), seed=args.seed)
    rec = datapipe.synth_emg(spec)
    rec.to_csv(out / "recording.csv")
    # label intervals: runs of equal label
    lab = rec.labels
    edges = np.flatnonzero(np.diff(lab)) + 1
    starts = np.concatenate([[0], edges])
    stops = np.concatenate([edges, [lab.size]])
    rows = [(f"{s / rec.sample_rate:.4f}", f"{e / rec.sample_rate:.4f}", int(lab[s]))
            for s, e in zip(starts, stops)]
    _write(out, "labels.csv", _table_csv(["t_start_s", "t_end_s", "label"], rows))
    return {"n_samples": rec.n_samples, "sample_rate": rec.sample_rate,
            "n_classes": spec.n_classes, "duration_s": rec.n_samples / rec.sample_rate,
            "samples_per_class": np.bincount(lab, minlength=spec.n_classes).tolist()}


def cmd_encode(args, out: Path) -> dict:
    rec = _recording(args)
    spikes = datapipe.encode_recording(rec, args.method)
    spikes.to_csv(out / "spikes.csv")
    dur_s = rec.n_samples / rec.sample_rate
    metrics = {"method": args.method, "n_events": len(spikes), "channels": spikes.channels,
               "rate_hz": (spikes.counts() / dur_s).tolist()}
    if rec.labels is not None:
        windows = datapipe.segment(rec, seed=args.seed)
        if not args.no_bleed_filter:
            windows = datapipe.filter_label_bleed(windows, rec)
        windows = datapipe.oversample(windows, seed=args.seed)
        labelled = datapipe.encode_windows(rec, windows, args.method, encoded=spikes)
        datapipe.save_windows(out / "windows", labelled)
        metrics["n_windows"] = len(labelled)
    return metrics


def cmd_curve(args, out: Path) -> dict:
    abl = harness.AblationConfig.named(args.ablation)
    curve = harness.io_curve(abl, _config(args), args.rates, args.duration * 1e6, args.seed)
    _write(out, f"curve_{args.ablation}.csv", curve.to_csv())
    return {"config": args.ablation, "r2": curve.r2(), "monotone": curve.monotone(),
            "rates_hz": curve.rates.tolist(), "output_hz": curve.output.tolist()}


def cmd_calibrate(args, out: Path) -> dict:
    config = _config(args)
    best, scores = harness.calibrate_weight_unit(config, args.grid, args.rates,
                                                 args.duration * 1e6, args.seed)
    rows = [(f"{k:g}", f"{v:.6f}") for k, v in sorted(scores.items())]
    _write(out, "calibrate.csv", _table_csv(["i_w_base", "r2"], rows))
    calibrated = NetworkConfig.from_dict({**config.to_dict(), "i_w_base": best})
    _write(out, "network_config.json", calibrated.to_json() + "\n")
    return {"i_w_base": best, "r2": {f"{k:g}": v for k, v in sorted(scores.items())}}


def cmd_train(args, out: Path) -> dict:
    config = harness.AblationConfig.named(args.ablation).apply(_config(args))
    windows = _windows(args)
    train_set, test_set = datapipe.split(windows, args.ratio, seed=args.seed)
    cm = learning.ClassMap.default(n_exc=config.n_exc)
    net = build_network(config)
    res = learning.train(net, train_set, args.epochs, class_map=cm, seed=args.seed)
    learning.save_weights(out / "weights.json", res.weights, config.digest(), args.seed,
                          args.epochs, ablation=args.ablation)
    rows = [(e, f"{m:.8f}") for e, m in enumerate(res.mean_weight)]
    _write(out, "weight_curve.csv", _table_csv(["epoch", "mean_weight"], rows))
    return {"ablation": args.ablation, "epochs": args.epochs, "n_train": len(train_set),
            "n_test": len(test_set), "mean_weight": res.mean_weight,
            "config_hash": config.digest()}


def cmd_eval(args, out: Path) -> dict:
    config = harness.AblationConfig.named(args.ablation).apply(_config(args))
    windows = _windows(args)
    cm = learning.ClassMap.default(n_exc=config.n_exc)
    names = list(cm.names) or [str(i) for i in range(cm.n_classes)]
    if args.weights is None:
        metrics = harness.evaluate(windows, config, seeds=tuple(args.seeds), k=args.folds,
                                   epochs=args.epochs)
    else:
        weights, meta = learning.load_weights(args.weights)
        _, test_set = datapipe.split(windows, args.ratio, seed=args.seed)
        net = build_network(config)
        net.set_plastic_weights(weights)
        confusion, rate = harness.score(net, test_set, cm, args.seed)
        support = confusion.sum(axis=1)
        recall = np.divide(np.diag(confusion), support, out=np.zeros(cm.n_classes),
                           where=support > 0)
        metrics = {"accuracy": float(np.trace(confusion) / max(confusion.sum(), 1)),
                   "confusion": confusion.tolist(), "per_class_recall": recall.tolist(),
                   "mean_output_rate": rate, "weights_config_hash": meta.get("config_hash")}
    _write(out, "confusion.csv", _confusion_csv(metrics["confusion"], names))
    return metrics


def cmd_ablate(args, out: Path) -> dict:
    windows = _windows(args)
    table = harness.ablation_run(windows, _config(args), names=tuple(args.names),
                                 seeds=tuple(args.seeds), epochs=args.epochs)
    rows = []
    for name, row in table.items():
        rows.append([name, f"{row['median']:.6f}", f"{row['spread'][0]:.6f}",
                     f"{row['spread'][1]:.6f}"] + [f"{a:.6f}" for a in row["accuracy"]])
    header = ["config", "median", "min", "max"] + [f"seed_{s}" for s in args.seeds]
    _write(out, "ablation.csv", _table_csv(header, rows))
    return {name: {"accuracy": row["accuracy"], "median": row["median"],
                   "spread": list(row["spread"]), "mean_weight": row["mean_weight"]}
            for name, row in table.items()}


# ---------------------------------------------------------------------------
# parser


def _add_data_args(p, method=True):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--windows", help="window archive directory (from `encode`)")
    g.add_argument("--input", help="recording CSV t,<ch...>[,label]; default: synthetic corpus")
    p.add_argument("--labels", help="label CSV t_start_s,t_end_s,label for --input")
    if method:
        p.add_argument("--method", choices=("adm", "pfm"), default="adm")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hdrsnn", description=__doc__.split("\n\n")[0])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--config", help="NetworkConfig JSON file")
    parser.add_argument("--out", default=".", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic EMG recording")
    defaults = datapipe.SynthSpec()
    p.add_argument("--trials", type=int, default=defaults.trials_per_class)
    p.add_argument("--amplitude", type=float, default=defaults.amplitude)
    p.add_argument("--gain-range", type=float, nargs=2, default=list(defaults.gain_range))
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("encode", help="encode a recording to spikes and a window archive")
    p.add_argument("--method", choices=("adm", "pfm"), required=True)
    p.add_argument("--input", help="recording CSV; default: synthetic corpus")
    p.add_argument("--labels", help="label CSV t_start_s,t_end_s,label")
    p.add_argument("--no-bleed-filter", action="store_true")
    p.set_defaults(func=cmd_encode)

    for name, func, text in (("curve", cmd_curve, "IO curve of one ablation config"),
                             ("calibrate", cmd_calibrate, "grid-search the weight unit")):
        p = sub.add_parser(name, help=text)
        if name == "curve":
            p.add_argument("--config", dest="ablation", required=True,
                           choices=tuple(harness.ABLATIONS))
        else:
            p.add_argument("--grid", type=float, nargs="+",
                           default=list(harness.DEFAULT_WEIGHT_GRID))
        p.add_argument("--rates", type=float, nargs="+", default=list(harness.DEFAULT_RATES))
        p.add_argument("--duration", type=float, default=1.0, help="seconds per rate")
        p.set_defaults(func=func)

    p = sub.add_parser("train", help="train the plastic weights on the train split")
    _add_data_args(p)
    p.add_argument("--ablation", default="Full", choices=tuple(harness.ABLATIONS))
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--ratio", type=float, default=0.8)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="k-fold evaluation, or score saved weights")
    _add_data_args(p)
    p.add_argument("--ablation", default="Full", choices=tuple(harness.ABLATIONS))
    p.add_argument("--weights", help="weights JSON; scores the test split of --seed")
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--ratio", type=float, default=0.8)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="accuracy of the ablation ladder")
    _add_data_args(p)
    p.add_argument("--names", nargs="+", default=list(harness.ABLATIONS),
                   choices=tuple(harness.ABLATIONS))
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--epochs", type=int, default=5)
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except CliError as exc:
        sys.stderr.write(_dump({"error": "UsageError", "message": str(exc)}))
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        metrics = args.func(args, out)
        metrics = {"command": args.command, "seed": args.seed, **metrics}
        text = _dump(metrics)
        _write(out, f"{args.command}.json", text)
        sys.stdout.write(text)
    except Exception as exc:  # report every failure as JSON
        sys.stderr.write(_dump({"error": type(exc).__name__, "message": str(exc),
                                "command": args.command}))
        return EXIT_FAILURE
    return 0


if __name__ == "__main__":
    sys.exit(main())
