"""Command line entry point: ``labeldist <gen|train|calibrate|evaluate|run|compare>``.

Exit status is 0 on success, 1 for invalid input or configuration and 2
for failures while running.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import calibration as cal
from .data import FormatError, load_dataset, save_dataset
from .experiment import (ExperimentConfig, build_targets, compare, dump_json, load_config,
                         run_experiment)
from .metrics import confusion, confusion_csv, score
from .network import forward, load_network, predict, save_network, softmax, train
from .synth import generate, split_assignment

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2


def _bins(text: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad bin list {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("bin counts must be positive integers")
    return vals


def _with_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seeds=(args.seed,))
    if getattr(args, "bins", None):
        report = cfg.report_bins if cfg.report_bins in args.bins else args.bins[0]
        cfg = replace(cfg, bin_counts=args.bins, report_bins=report)
    return cfg


def _split_parts(data_dir: Path):
    ds = load_dataset(data_dir)
    split_file = data_dir / "split.csv"
    if not split_file.exists():
        raise FormatError(f"{split_file} not found; run `labeldist gen` with a split section")
    with open(split_file, newline="", encoding="utf-8") as fh:
        assign = {row["sample_id"]: row["set"] for row in csv.DictReader(fh)}
    sets = np.array([assign.get(str(s), "") for s in ds.sample_ids])
    if np.any(sets == ""):
        raise FormatError(f"{split_file}: some samples have no split assignment")
    return ds, {name: ds.subset(np.flatnonzero(sets == name)) for name in ("train", "val", "test")}


def _emit(obj, fmt: str, out: Path | None, name: str):
    if fmt == "json":
        text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        rows = obj if isinstance(obj, list) else [obj]
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        text = buf.getvalue()
    if out is None:
        sys.stdout.write(text)
    else:
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.{fmt}").write_text(text)


def cmd_gen(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, generator=replace(cfg.generator, seed=args.seed))
    data = generate(cfg.generator)
    out = Path(args.out)
    save_dataset(data, out)
    assign = split_assignment(data, cfg.split)
    with open(out / "split.csv", "w", encoding="utf-8") as fh:
        fh.write("sample_id,set\n")
        for sid in data.sample_ids:
            fh.write(f"{sid},{assign[str(sid)]}\n")
    dump_json({"generator": cfg.generator.to_dict(), "split": cfg.split.to_dict()},
              out / "generator.json")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _with_overrides(load_config(args.config), args)
    _, parts = _split_parts(Path(args.data))
    seed = cfg.seeds[0]
    tcfg = replace(cfg.train, seed=seed, loss_kind=cfg.effective_loss)
    result = train(cfg.network_spec,
                   (parts["train"].features, build_targets(parts["train"], cfg)),
                   (parts["val"].features, build_targets(parts["val"], cfg)), tcfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_network(result.network, out / "model.json")
    dump_json([asdict(e) for e in result.log], out / "train_log.json")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    net = load_network(args.model)
    _, parts = _split_parts(Path(args.data))
    val = parts["val"]
    t = cal.fit_temperature(forward(net, val.features), val.majority)
    doc = {"temperature": t,
           "val_nll_before": cal.temperature_nll(forward(net, val.features), val.majority, 1.0),
           "val_nll_after": cal.temperature_nll(forward(net, val.features), val.majority, t)}
    _emit(doc, args.format, Path(args.out) if args.out else None, "temperature")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    net = load_network(args.model)
    _, parts = _split_parts(Path(args.data))
    test = parts[args.split]
    t = args.temperature
    if args.temperature_file:
        t = json.loads(Path(args.temperature_file).read_text())["temperature"]
    if args.mc_passes:
        probs = predict(net, test.features, mode="mc_dropout", n_passes=args.mc_passes,
                        seed=args.seed or 0)
    else:
        logits = forward(net, test.features)
        probs = softmax(logits) if t is None else cal.apply_temperature(logits, t)
    preds = cal.Predictions(probs, test.majority, test.distributional, test.sample_ids)
    bins = args.bins or cal.DEFAULT_BIN_COUNTS
    out = Path(args.out) if args.out else None
    _emit(score(preds).to_dict(), args.format, out, "scores")
    _emit(cal.calibration_report(preds, bins), args.format, out, "calibration")
    if out is not None:
        report_bins = 20 if 20 in bins else bins[0]
        table = cal.reliability_data(cal.bins_for(preds, report_bins), preds)
        (out / "reliability.csv").write_text(table.to_csv())
        (out / "reliability.svg").write_text(cal.reliability_svg(table))
        cm = confusion(preds.true_class, preds.predicted_class, preds.n_classes)
        (out / "confusion.csv").write_text(confusion_csv(cm))
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _with_overrides(load_config(args.config), args)
    summary = run_experiment(cfg, args.out)
    for seed, msg in sorted(summary.failures.items()):
        print(f"seed {seed} failed: {msg}", file=sys.stderr)
    agg = summary.aggregate()
    _emit({k: v["mean"] for k, v in agg["scores"].items() if v}, args.format, None, "summary")
    return EXIT_RUNTIME if not summary.seeds else EXIT_OK


def cmd_compare(args) -> int:
    table = compare(*args.runs, bins=args.compare_bins)
    if args.format == "json":
        sys.stdout.write(json.dumps(table.to_dict(), indent=2) + "\n")
    elif args.format == "csv":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["run", *(f"{h} {kind}" for h in table.headers for kind in ("mean", "sd"))])
        for name, means, sds in zip(table.names, table.means, table.sds):
            w.writerow([name, *("" if v is None else repr(v)
                                for pair in zip(means, sds) for v in pair)])
    else:
        sys.stdout.write(table.render())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="labeldist", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True, out_required=False):
        if config:
            sp.add_argument("--config", required=True, help="experiment config JSON")
        sp.add_argument("--out", required=out_required, help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--bins", type=_bins, help="comma-separated bin counts, e.g. 10,15,20,25")
        sp.add_argument("--format", choices=("json", "csv"), default="json")

    sp = sub.add_parser("gen", help="write a synthetic data set")
    common(sp, out_required=True)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("train", help="train one model on a generated data set")
    common(sp, out_required=True)
    sp.add_argument("--data", required=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("calibrate", help="fit a temperature on the validation split")
    common(sp, config=False)
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("evaluate", help="score a model on a data split")
    common(sp, config=False)
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--split", choices=("train", "val", "test"), default="test")
    sp.add_argument("--temperature", type=float)
    sp.add_argument("--temperature-file")
    sp.add_argument("--mc-passes", type=int)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("run", help="full multi-seed experiment")
    common(sp, out_required=True)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("compare", help="side-by-side table of finished runs")
    sp.add_argument("runs", nargs="+", help="run directories")
    sp.add_argument("--compare-bins", "--bins", dest="compare_bins", type=int, default=20)
    sp.add_argument("--format", choices=("json", "csv", "text"), default="text")
    sp.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, TypeError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
