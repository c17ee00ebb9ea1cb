"""Command-line interface.

Subcommands mirror the pipeline stages: gen-data, reduce, pretrain,
finetune, evaluate, run (full pipeline), report. Global flags --seed,
--config, --out work on every subcommand; option precedence is
flag > SHMSSL_* environment variable > config file > built-in default.
Exits 0 on success; on failure prints one machine-parsable SHMSSL-ERROR
line to stderr and exits nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .configfile import coerce, load_settings
from .datagen import (
    CASE_PATTERNS,
    LabeledSample,
    gen_dataset,
    read_segment_csv,
    scaled_counts,
    write_segment_csv,
)
from .errors import ConfigError, PipelineError, ShmsslError
from .experiment import (
    ExperimentConfig,
    ResultTable,
    emit_report,
    merge_tables,
    run_experiment,
)
from .feature_io import feature_matrix, read_features, write_features
from .finetune import FinetuneConfig, finetune, predict
from .metrics import confusion, overall, write_confusion_csv
from .pretrain import PretrainConfig, pretrain
from .reduction import detect_missing, ierfh


def _setting(args_value, settings: dict, key: str, kind, default):
    if args_value is not None:
        return args_value
    if key in settings:
        return coerce(settings[key], kind)
    return default


def _labeled_samples(path) -> list[LabeledSample]:
    features, labels = read_features(path)
    if labels is None:
        raise ConfigError(f"{path} has no labels; this command needs a labeled feature file")
    return [LabeledSample(fv, int(label)) for fv, label in zip(features, labels)]


def _out_dir(args, settings) -> Path:
    out = Path(_setting(args.out, settings, "out", str, "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _seed(args, settings) -> int:
    return _setting(args.seed, settings, "seed", int, 0)


def _cmd_gen_data(args, settings) -> int:
    out = _out_dir(args, settings)
    seed = _seed(args, settings)
    case = _setting(args.case, settings, "case", int, 1)
    rate = _setting(args.rate, settings, "rate", float, 1.0)
    duration = _setting(args.duration, settings, "duration", float, 3600.0)
    if args.counts:
        counts = dict(zip(CASE_PATTERNS[case], (int(v) for v in args.counts.split(","))))
    else:
        scale = _setting(args.scale, settings, "scale", float, 0.1)
        counts = scaled_counts(case, scale)
    raw_sink = None
    if args.raw_dir:
        raw_root = Path(args.raw_dir)
        raw_root.mkdir(parents=True, exist_ok=True)

        def raw_sink(spec, segment):
            write_segment_csv(segment, raw_root / f"{spec.pattern}_{spec.hour_index:05d}.csv")

    samples = gen_dataset(case, counts, seed, sample_rate_hz=rate,
                          duration_s=duration, raw_sink=raw_sink)
    path = out / f"case{case}.ierfh"
    write_features(path, [s.feature for s in samples], [s.label for s in samples])
    print(f"wrote {len(samples)} samples ({len(CASE_PATTERNS[case])} classes) to {path}")
    return 0


def _cmd_reduce(args, settings) -> int:
    out = _out_dir(args, settings)
    lo, hi = args.range_min, args.range_max
    features = []
    skipped = 0
    for i, csv_path in enumerate(args.inputs):
        segment = read_segment_csv(csv_path, args.rate, lo, hi, channel_id=i, hour_index=0)
        if detect_missing(segment):
            skipped += 1
            continue
        features.append(ierfh(segment))
    path = out / "features.ierfh"
    write_features(path, features)
    print(f"reduced {len(features)} segments to {path}"
          + (f" ({skipped} flagged missing and skipped)" if skipped else ""))
    return 0


def _cmd_pretrain(args, settings) -> int:
    out = _out_dir(args, settings)
    seed = _seed(args, settings)
    feats, _ = read_features(args.features)  # labels, if any, are ignored
    config = PretrainConfig(
        method=args.method,
        epochs=_setting(args.epochs, settings, "pretrain_epochs", int, 200),
        batch_size=_setting(args.batch_size, settings, "batch_size", int, 64),
        lr=_setting(args.lr, settings, "lr", float, 1e-3),
        temperature=args.temperature,
        seed=seed,
    )
    bundle, trace = pretrain(args.method, feature_matrix(feats), config)
    ckpt = out / f"{args.method}_pretrained.ckpt"
    save_checkpoint(bundle, ckpt)
    trace_path = out / f"{args.method}_pretrain_trace.csv"
    with trace_path.open("w") as fh:
        fh.write("epoch,method,loss\n")
        for epoch, loss in enumerate(trace):
            fh.write(f"{epoch},{args.method},{loss:.9g}\n")
    print(f"pre-trained {args.method}: first-epoch loss {trace[0]:.6g}, "
          f"final {trace[-1]:.6g}; saved {ckpt}")
    return 0


def _cmd_finetune(args, settings) -> int:
    out = _out_dir(args, settings)
    seed = _seed(args, settings)
    low = _labeled_samples(args.train)
    val = _labeled_samples(args.val)
    pretrained = load_checkpoint(args.checkpoint) if args.checkpoint else None
    config = FinetuneConfig(
        epochs=_setting(args.epochs, settings, "finetune_epochs", int, 50),
        batch_size=_setting(args.batch_size, settings, "batch_size", int, 64),
        lr=_setting(args.lr, settings, "lr", float, 1e-3),
        seed=seed,
    )
    model, trace = finetune(pretrained, low, val, config, k=args.k)
    ckpt = out / "classifier_best.ckpt"
    save_checkpoint(model, ckpt)
    with (out / "finetune_trace.csv").open("w") as fh:
        fh.write("epoch,val_f1,val_accuracy\n")
        for epoch, f1, acc in trace:
            fh.write(f"{epoch},{f1:.9g},{acc:.9g}\n")
    best = max((f1 for _, f1, _ in trace), default=float("nan"))
    print(f"fine-tuned over {config.epochs} epochs: best validation F1 {best:.4f}; saved {ckpt}")
    return 0


def _cmd_evaluate(args, settings) -> int:
    out = _out_dir(args, settings)
    model = load_checkpoint(args.checkpoint)
    test = _labeled_samples(args.test)
    rows = np.asarray([s.feature.values for s in test])
    labels = np.asarray([s.label for s in test])
    k = model.nets["head"].layers[-1].spec.out_channels
    cm = confusion(predict(model, rows), labels, k)
    accuracy, f1 = overall(cm)
    write_confusion_csv(cm, out / "confusion.csv")
    with (out / "metrics.csv").open("w") as fh:
        fh.write("accuracy,macro_f1\n")
        fh.write(f"{accuracy:.6f},{f1:.6f}\n")
    print(f"accuracy={accuracy:.4f} macro_f1={f1:.4f}")
    return 0


def _cmd_run(args, settings) -> int:
    out = _out_dir(args, settings)
    methods_raw = _setting(args.methods, settings, "methods", str, "sup,ae,simclr,mixup,gan")
    low_shot_raw = _setting(args.low_shot, settings, "low_shot", str, "ls1")
    low_shot = low_shot_raw
    if "," in low_shot_raw:
        low_shot = tuple(int(v) for v in low_shot_raw.split(","))
    config = ExperimentConfig(
        case=_setting(args.case, settings, "case", int, 1),
        methods=tuple(m.strip() for m in methods_raw.split(",") if m.strip()),
        low_shot=low_shot,
        repeats=_setting(args.repeats, settings, "repeats", int, 5),
        seed=_seed(args, settings),
        out_dir=out,
        profile=_setting(args.profile, settings, "profile", str, "desk"),
        paper_pool=args.paper_pool or coerce(settings.get("paper_pool", "0"), bool),
        scale=_setting(args.scale, settings, "scale", float, None),
        pretrain_epochs=_setting(args.pretrain_epochs, settings, "pretrain_epochs", int, None),
        finetune_epochs=_setting(args.finetune_epochs, settings, "finetune_epochs", int, None),
        sup_epochs=_setting(args.sup_epochs, settings, "sup_epochs", int, None),
        batch_size=_setting(args.batch_size, settings, "batch_size", int, 64),
        lr=_setting(args.lr, settings, "lr", float, 1e-3),
    )
    table = run_experiment(config)
    for r in table.results:
        print(f"{r.method:>7s} @ {r.low_shot_name}: "
              f"F1 {100 * r.mean_f1:.2f} ± {100 * r.std_f1:.2f} over {len(r.f1_runs)} repeats")
    print(f"report written under {out}")
    return 0


def _cmd_report(args, settings) -> int:
    out = _out_dir(args, settings)
    tables = []
    for path in args.results:
        with open(path) as fh:
            tables.append(ResultTable.from_dict(json.load(fh)))
    emit_report(merge_tables(tables), out)
    print(f"report written under {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    common.add_argument("--config", default=None, help="flat key=value config file")
    common.add_argument("--out", default=None, help="output directory (default ./out)")

    parser = argparse.ArgumentParser(prog="shmssl", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common],
                       help="generate a synthetic labeled dataset as an .ierfh file")
    p.add_argument("--case", type=int, choices=(1, 2), default=None)
    p.add_argument("--scale", type=float, default=None,
                   help="fraction of the full per-pattern counts")
    p.add_argument("--counts", default=None,
                   help="comma-separated per-pattern counts (overrides --scale)")
    p.add_argument("--rate", type=float, default=None, help="sample rate in Hz")
    p.add_argument("--duration", type=float, default=None, help="segment length in seconds")
    p.add_argument("--raw-dir", default=None, help="also dump raw segments as CSV here")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("reduce", parents=[common],
                       help="reduce raw segment CSVs to an .ierfh feature file")
    p.add_argument("inputs", nargs="+", help="raw segment CSVs (time,value rows)")
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--range-min", type=float, required=True)
    p.add_argument("--range-max", type=float, required=True)
    p.set_defaults(func=_cmd_reduce)

    p = sub.add_parser("pretrain", parents=[common],
                       help="self-supervised pre-training on an .ierfh file")
    p.add_argument("--features", required=True)
    p.add_argument("--method", required=True, choices=("ae", "simclr", "mixup", "gan"))
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--temperature", type=float, default=None)
    p.set_defaults(func=_cmd_pretrain)

    p = sub.add_parser("finetune", parents=[common],
                       help="fine-tune a classifier on a labeled low-shot .ierfh file")
    p.add_argument("--checkpoint", default=None,
                   help="pre-trained checkpoint; omit for the supervised baseline")
    p.add_argument("--train", required=True, help="labeled low-shot feature file")
    p.add_argument("--val", required=True, help="labeled validation feature file")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--k", type=int, default=None, help="number of classes")
    p.set_defaults(func=_cmd_finetune)

    p = sub.add_parser("evaluate", parents=[common],
                       help="score a classifier checkpoint on a labeled test file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("run", parents=[common], help="full pipeline for one configuration")
    p.add_argument("--case", type=int, choices=(1, 2), default=None)
    p.add_argument("--methods", default=None, help="comma list from sup,ae,simclr,mixup,gan")
    p.add_argument("--low-shot", default=None, help="named spec ls1..ls6 or comma counts")
    p.add_argument("--scale", type=float, default=None)
    p.add_argument("--repeats", type=int, default=None)
    p.add_argument("--profile", choices=("desk", "paper"), default=None)
    p.add_argument("--paper-pool", action="store_true",
                   help="pre-train on the whole dataset including the test split")
    p.add_argument("--pretrain-epochs", type=int, default=None)
    p.add_argument("--finetune-epochs", type=int, default=None)
    p.add_argument("--sup-epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("report", parents=[common],
                       help="merge results.json files into one report")
    p.add_argument("results", nargs="+", help="results.json files from runs")
    p.set_defaults(func=_cmd_report)

    return parser


def _error_line(exc: BaseException) -> str:
    kind = type(exc).__name__
    extra = ""
    if isinstance(exc, PipelineError):
        extra = f" stage={exc.stage} method={exc.method} seed={exc.seed}"
        message = str(exc.cause)
    else:
        message = str(exc)
    return f'SHMSSL-ERROR kind={kind}{extra} msg="{message}"'


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = load_settings(args.config)
        return args.func(args, settings)
    except ShmsslError as exc:
        print(_error_line(exc), file=sys.stderr)
        return 1
    except OSError as exc:
        print(_error_line(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
