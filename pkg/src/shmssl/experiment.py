"""Experiment orchestration: split, pre-train, fine-tune, evaluate, report.

One run covers one case and one low-shot specification: every requested
method is pre-trained once on the unlabeled pool, fine-tuned `repeats` times
with different seeds on the same low-shot draw, and scored on the held-out
test split. All artifacts (checkpoints, loss traces, confusion matrices,
result tables) land under the output directory and are a pure function of
the master seed.

The unlabeled pool defaults to the label+validation splits so the test split
stays untouched end to end; `paper_pool=True` widens it to the whole dataset
(pre-training is label-blind either way).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng as rngmod
from .checkpoint import save_checkpoint
from .datagen import (
    CASE_PATTERNS,
    LOW_SHOT_SPECS,
    LabeledSample,
    gen_dataset,
    scaled_counts,
)
from .errors import ConfigError, PipelineError, ShmsslError
from .finetune import FinetuneConfig, evaluate, finetune, predict
from .metrics import confusion, overall, per_class_metrics, write_confusion_csv
from .models import METHODS
from .pretrain import PretrainConfig, pretrain

PROFILES = {
    "desk": {"scale": 0.1, "pretrain_epochs": 40, "finetune_epochs": 20,
             "sup_epochs": 80, "sample_rate_hz": 1.0},
    "paper": {"scale": 1.0, "pretrain_epochs": 200, "finetune_epochs": 50,
              "sup_epochs": 200, "sample_rate_hz": None},
}
PAPER_RATES = {1: 20.0, 2: 50.0}


@dataclass
class ExperimentConfig:
    case: int = 1
    methods: tuple[str, ...] = ("sup", "ae", "simclr", "mixup", "gan")
    low_shot: str | dict | tuple = "ls1"
    split_ratios: tuple[float, float, float] = (0.2, 0.3, 0.5)
    repeats: int = 5
    seed: int = 0
    out_dir: str | Path = "out"
    profile: str = "desk"
    paper_pool: bool = False
    scale: float | None = None
    pretrain_epochs: int | None = None
    finetune_epochs: int | None = None
    sup_epochs: int | None = None
    batch_size: int = 64
    lr: float = 1e-3
    sample_rate_hz: float | None = None
    duration_s: float = 3600.0

    def __post_init__(self):
        if self.case not in CASE_PATTERNS:
            raise ConfigError(f"case must be 1 or 2, got {self.case}")
        if self.profile not in PROFILES:
            raise ConfigError(f"profile must be one of {sorted(PROFILES)}")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; choose from {METHODS}")
        if abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ConfigError(f"split ratios {self.split_ratios} must sum to 1")
        if any(r <= 0 for r in self.split_ratios):
            raise ConfigError("split ratios must be positive")
        if self.repeats < 1:
            raise ConfigError("repeats must be positive")

    def _from_profile(self, name: str):
        value = getattr(self, name)
        return PROFILES[self.profile][name] if value is None else value

    def resolved(self) -> dict:
        rate = self._from_profile("sample_rate_hz")
        if rate is None:
            rate = PAPER_RATES[self.case]
        name, counts = resolve_low_shot(self.case, self.low_shot)
        return {
            "scale": self._from_profile("scale"),
            "pretrain_epochs": self._from_profile("pretrain_epochs"),
            "finetune_epochs": self._from_profile("finetune_epochs"),
            "sup_epochs": self._from_profile("sup_epochs"),
            "sample_rate_hz": rate,
            "low_shot_name": name,
            "low_shot_counts": counts,
        }


def resolve_low_shot(case: int, value) -> tuple[str, dict[str, int]]:
    """Turn a named spec ('ls1'..'ls6'), mapping, or sequence into counts."""
    patterns = CASE_PATTERNS[case]
    if isinstance(value, str):
        specs = LOW_SHOT_SPECS[case]
        if value not in specs:
            raise ConfigError(f"unknown low-shot spec {value!r}; case {case} has {sorted(specs)}")
        return value, dict(zip(patterns, specs[value]))
    if isinstance(value, dict):
        unknown = set(value) - set(patterns)
        if unknown:
            raise ConfigError(f"patterns {sorted(unknown)} are not part of case {case}")
        return "custom", {p: int(value.get(p, 0)) for p in patterns}
    counts = tuple(int(v) for v in value)
    if len(counts) != len(patterns):
        raise ConfigError(f"need {len(patterns)} counts for case {case}, got {len(counts)}")
    return "custom", dict(zip(patterns, counts))


def _apportion(n: int, ratios) -> list[int]:
    quotas = [n * r for r in ratios]
    floors = [int(np.floor(q)) for q in quotas]
    order = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - floors[i]), i))
    for i in order[: n - sum(floors)]:
        floors[i] += 1
    return floors


def split_dataset(samples: list[LabeledSample], ratios, seed: int
                  ) -> tuple[list[LabeledSample], list[LabeledSample], list[LabeledSample]]:
    """Stratified split into (label, validation, test) partitions.

    Within every class the three shares match the ratios to within rounding;
    the partitions are disjoint and cover the input exactly.
    """
    if not samples:
        raise ConfigError("cannot split an empty dataset")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios {tuple(ratios)} must sum to 1")
    by_class: dict[int, list[int]] = {}
    for i, s in enumerate(samples):
        by_class.setdefault(s.label, []).append(i)
    splits: tuple[list[LabeledSample], ...] = ([], [], [])
    for label in sorted(by_class):
        idxs = np.asarray(by_class[label])
        if idxs.size < len(ratios):
            raise ConfigError(
                f"class {label} has {idxs.size} samples, fewer than {len(ratios)} splits"
            )
        order = rngmod.spawn(seed, "split", label).permutation(idxs.size)
        shuffled = idxs[order]
        start = 0
        for part, count in zip(splits, _apportion(idxs.size, ratios)):
            part.extend(samples[j] for j in shuffled[start:start + count])
            start += count
    return splits


def draw_low_shot(label_split: list[LabeledSample], counts: dict[str, int] | list[int],
                  seed: int, class_names: list[str] | None = None) -> list[LabeledSample]:
    """Uniform without-replacement per-class draw from the label split."""
    by_class: dict[int, list[int]] = {}
    for i, s in enumerate(label_split):
        by_class.setdefault(s.label, []).append(i)
    if isinstance(counts, dict):
        if class_names is None:
            raise ConfigError("per-pattern counts need class_names to map onto labels")
        wanted = [counts.get(name, 0) for name in class_names]
    else:
        wanted = list(counts)
    out: list[LabeledSample] = []
    for label, want in enumerate(wanted):
        if want == 0:
            continue
        name = class_names[label] if class_names else str(label)
        available = by_class.get(label, [])
        if want > len(available):
            raise ConfigError(
                f"class {name!r} has only {len(available)} labeled samples, need {want}"
            )
        picks = rngmod.spawn(seed, "lowshot", label).choice(
            len(available), size=want, replace=False)
        out.extend(label_split[available[j]] for j in picks)
    return out


@dataclass
class MethodResult:
    method: str
    low_shot_name: str
    f1_runs: list[float]
    acc_runs: list[float]
    best_rep: int
    class_names: list[str]
    precision: list[float]
    recall: list[float]

    @property
    def mean_f1(self) -> float:
        return float(np.mean(self.f1_runs))

    @property
    def std_f1(self) -> float:
        # Population std so a single repeat reports 0.
        return float(np.std(self.f1_runs))


@dataclass
class ResultTable:
    case: int
    results: list[MethodResult] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "results": [
                {
                    "method": r.method, "low_shot": r.low_shot_name,
                    "f1_runs": r.f1_runs, "acc_runs": r.acc_runs,
                    "mean_f1": r.mean_f1, "std_f1": r.std_f1,
                    "best_rep": r.best_rep, "class_names": r.class_names,
                    "precision": r.precision, "recall": r.recall,
                }
                for r in self.results
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ResultTable":
        table = cls(case=data["case"])
        for r in data["results"]:
            table.results.append(MethodResult(
                method=r["method"], low_shot_name=r["low_shot"],
                f1_runs=list(r["f1_runs"]), acc_runs=list(r["acc_runs"]),
                best_rep=r["best_rep"], class_names=list(r["class_names"]),
                precision=list(r["precision"]), recall=list(r["recall"]),
            ))
        return table


def merge_tables(tables: list[ResultTable]) -> ResultTable:
    if not tables:
        raise ConfigError("no result tables to merge")
    cases = {t.case for t in tables}
    if len(cases) != 1:
        raise ConfigError(f"cannot merge tables from different cases {sorted(cases)}")
    merged = ResultTable(case=tables[0].case)
    for t in tables:
        merged.results.extend(t.results)
    return merged


def _write_loss_trace(path: Path, method: str, trace: list[float]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "method", "loss"])
        for epoch, loss in enumerate(trace):
            writer.writerow([epoch, method, f"{loss:.9g}"])


def _write_finetune_trace(path: Path, trace) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "val_f1", "val_accuracy"])
        for epoch, f1, acc in trace:
            writer.writerow([epoch, f"{f1:.9g}", f"{acc:.9g}"])


def run_experiment(config: ExperimentConfig) -> ResultTable:
    """Execute the full pipeline for one case and one low-shot specification."""
    res = config.resolved()
    out = Path(config.out_dir)
    for sub in ("checkpoints", "traces", "confusion"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    class_names = list(CASE_PATTERNS[config.case])
    k = len(class_names)

    def stage(name: str, method: str, seed: int, fn):
        try:
            return fn()
        except ShmsslError as exc:
            raise PipelineError(name, method, seed, exc) from exc

    samples = stage("gen-data", "-", config.seed, lambda: gen_dataset(
        config.case, scaled_counts(config.case, res["scale"]), config.seed,
        sample_rate_hz=res["sample_rate_hz"], duration_s=config.duration_s))
    label_split, val_split, test_split = stage(
        "split", "-", config.seed,
        lambda: split_dataset(samples, config.split_ratios, config.seed))
    low = stage("low-shot", "-", config.seed, lambda: draw_low_shot(
        label_split, res["low_shot_counts"], config.seed, class_names))

    pool = label_split + val_split + (test_split if config.paper_pool else [])
    pool_rows = np.asarray([s.feature.values for s in pool])

    table = ResultTable(case=config.case)
    for method in config.methods:
        pretrained = None
        if method != "sup":
            pre_seed = rngmod.derive_seed(config.seed, "pretrain", method)
            pre_cfg = PretrainConfig(method=method, epochs=res["pretrain_epochs"],
                                     batch_size=config.batch_size, lr=config.lr,
                                     seed=pre_seed)
            pretrained, trace = stage("pretrain", method, pre_seed,
                                      lambda: pretrain(method, pool_rows, pre_cfg))
            _write_loss_trace(out / "traces" / f"{method}_pretrain.csv", method, trace)
            save_checkpoint(pretrained, out / "checkpoints" / f"{method}_pretrained.ckpt")

        f1_runs: list[float] = []
        acc_runs: list[float] = []
        test_rows = np.asarray([s.feature.values for s in test_split])
        test_labels = np.asarray([s.label for s in test_split])
        best_cm = None
        best_rep = 0
        for rep in range(config.repeats):
            ft_seed = rngmod.derive_seed(config.seed, "finetune", method, rep)
            epochs = res["sup_epochs"] if method == "sup" else res["finetune_epochs"]
            ft_cfg = FinetuneConfig(epochs=epochs, batch_size=config.batch_size,
                                    lr=config.lr, seed=ft_seed, repeats=config.repeats)
            model, ft_trace = stage("finetune", method, ft_seed,
                                    lambda: finetune(pretrained, low, val_split, ft_cfg, k=k))
            _write_finetune_trace(out / "traces" / f"{method}_finetune_rep{rep}.csv", ft_trace)
            save_checkpoint(model, out / "checkpoints" / f"{method}_best_rep{rep}.ckpt")
            cm = stage("evaluate", method, ft_seed, lambda: confusion(
                predict(model, test_rows), test_labels, k, class_names))
            accuracy, f1 = overall(cm)
            if not f1_runs or f1 > max(f1_runs):
                best_cm, best_rep = cm, rep
            f1_runs.append(f1)
            acc_runs.append(accuracy)
        precision, recall, _ = per_class_metrics(best_cm)
        write_confusion_csv(best_cm, out / "confusion" / f"{method}_best.csv")
        table.results.append(MethodResult(
            method=method, low_shot_name=res["low_shot_name"],
            f1_runs=f1_runs, acc_runs=acc_runs, best_rep=best_rep,
            class_names=class_names,
            precision=[float(p) for p in precision],
            recall=[float(r) for r in recall],
        ))

    emit_report(table, out)
    return table


def emit_report(table: ResultTable, out_dir) -> None:
    """Write the mean±std F1 grid, per-class metrics, and the raw table.

    Output is byte-identical for identical inputs: fixed orders, fixed float
    formats, no timestamps.
    """
    if not table.results:
        raise ConfigError("result table is empty")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    methods: list[str] = []
    specs: list[str] = []
    for r in table.results:
        if r.method not in methods:
            methods.append(r.method)
        if r.low_shot_name not in specs:
            specs.append(r.low_shot_name)
    cells = {(r.method, r.low_shot_name): r for r in table.results}

    with (out / "results.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method"] + specs)
        for method in methods:
            row = [method]
            for spec in specs:
                r = cells.get((method, spec))
                row.append(f"{100 * r.mean_f1:.2f} ± {100 * r.std_f1:.2f}" if r else "")
            writer.writerow(row)

    with (out / "per_class.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "low_shot", "class", "precision", "recall"])
        for r in table.results:
            for name, p, rec in zip(r.class_names, r.precision, r.recall):
                writer.writerow([r.method, r.low_shot_name, name, f"{p:.4f}", f"{rec:.4f}"])

    with (out / "results.json").open("w") as fh:
        json.dump(table.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
