"""Accuracy, robust accuracy, multi-run aggregation and improvement percentages."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attacks import AttackSpec, craft
from .data import Dataset
from .errors import ContractError
from .model import ModelState, predict


@dataclass(frozen=True)
class ConfusionCounts:
    """Per-example outcome counts; every evaluated example lands in exactly one cell.

    Binary problems use the usual cells with class 1 positive. Multiclass
    problems count a correct prediction as TP and a miss as FN, so
    (TP + TN) / total is the fraction correct.
    """
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def accuracy(self) -> float:
        if self.total == 0:
            raise ContractError("no evaluated examples")
        return (self.tp + self.tn) / self.total


def confusion_counts(y_true, y_pred, num_classes: int) -> ConfusionCounts:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if num_classes == 2:
        return ConfusionCounts(
            tp=int(np.sum((y_true == 1) & (y_pred == 1))),
            tn=int(np.sum((y_true == 0) & (y_pred == 0))),
            fp=int(np.sum((y_true == 0) & (y_pred == 1))),
            fn=int(np.sum((y_true == 1) & (y_pred == 0))),
        )
    correct = int(np.sum(y_true == y_pred))
    return ConfusionCounts(tp=correct, tn=0, fp=0, fn=int(y_true.size) - correct)


def accuracy_from_counts(counts: ConfusionCounts) -> float:
    return counts.accuracy


def accuracy(model: ModelState, test: Dataset) -> float:
    if len(test) == 0:
        raise ContractError("empty test set")
    return float(np.mean(predict(model, test.inputs) == test.labels))


def build_adversarial_test(model: ModelState, test: Dataset, spec: AttackSpec, seed: int) -> Dataset:
    """Attack every test example, ascending on the model's own predictions."""
    if len(test) == 0:
        return test
    adv = craft(model, test.as_batch(), spec, seed, target_labels=predict(model, test.inputs))
    return Dataset(adv.inputs, test.labels, test.num_classes, f"{test.name}+{spec.family}")


def robust_accuracy(model: ModelState, adv_test: Dataset) -> float:
    return accuracy(model, adv_test)


@dataclass
class RunSummary:
    metrics: list
    mean: dict
    std: dict
    repetitions: int
    fingerprint: str = ""


def aggregate(runs, metrics=("clean_accuracy", "robust_accuracy", "train_loss"), fingerprint: str = "") -> RunSummary:
    """Per-iteration mean and population std across repetitions.

    ``runs`` is a sequence of record sequences; records expose the metric
    names as attributes (or keys).
    """
    runs = list(runs)
    if not runs:
        raise ContractError("nothing to aggregate")
    lengths = {len(r) for r in runs}
    if len(lengths) != 1:
        raise ContractError(f"ragged runs: lengths {sorted(lengths)}")
    mean, std = {}, {}
    for m in metrics:
        vals = np.array([[_get(rec, m) for rec in run] for run in runs], dtype=np.float64)
        mean[m] = vals.mean(axis=0)
        std[m] = vals.std(axis=0)
    return RunSummary(list(metrics), mean, std, len(runs), fingerprint)


def _get(rec, name):
    return rec[name] if isinstance(rec, dict) else getattr(rec, name)


def improvement_pct(ours: float, baseline: float) -> float:
    if not baseline > 0:
        raise ContractError("baseline must be positive")
    return round(100.0 * (ours - baseline) / baseline, 2)


def mean_improvement(values) -> float:
    return round(float(np.mean(values)), 2)
