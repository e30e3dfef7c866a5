"""The robust active-learning loop with EWC and a dynamic attack schedule."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .acquisition import AcquisitionConfig, select
from .attacks import AttackSchedule, craft, schedule_attack
from .data import LabelPool, label_oracle
from .errors import ConfigError, TrainingError
from .ewc import consolidate
from .metrics import accuracy, build_adversarial_test, robust_accuracy
from .model import Batch, ModelConfig, OptimizerConfig, init_model, train

# stream tags for derive_seed
_INIT, _TRAIN, _SELECT, _FISHER, _CRAFT, _SUBSET, _EVAL = range(7)


def derive_seed(seed: int, *tags: int) -> int:
    return int(np.random.SeedSequence([int(seed), *map(int, tags)]).generate_state(1)[0])


@dataclass(frozen=True)
class LoopConfig:
    iterations: int = 10
    candidates_per_iter: int = 200
    lam: float = 0.5
    gamma: float = 1.0
    adversarial_training: bool = True
    attack_fraction: float = 1.0
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    schedule: AttackSchedule = field(default_factory=AttackSchedule.default)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.candidates_per_iter < 1:
            raise ConfigError("candidates_per_iter must be >= 1")
        if self.lam < 0:
            raise ConfigError("lambda must be >= 0")
        if self.gamma < 0:
            raise ConfigError("gamma must be >= 0")
        if not 0 < self.attack_fraction <= 1:
            raise ConfigError("attack_fraction must lie in (0, 1]")
        if len(self.schedule) == 0:
            raise ConfigError("attack schedule is empty")

    def replace(self, **changes) -> "LoopConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    attack_name: str
    clean_accuracy: float
    robust_accuracy: float
    labeled_count: int
    train_loss: float
    seed: int
    # robust accuracy of this iteration's model under the previous iteration's attack
    prev_attack_robust_accuracy: float = float("nan")


def run_roal(pool: LabelPool, model_config: ModelConfig, loop_config: LoopConfig, seed: int,
             trace: Optional[Callable[[int, str], None]] = None) -> list[IterationRecord]:
    """Run the loop for ``loop_config.iterations`` rounds, mutating ``pool``.

    Per round: train (EWC against the previous anchor), select, label,
    consolidate, pick the round's attack, craft adversarial copies of the new
    labels, evaluate clean and robust accuracy.
    """
    T, C = loop_config.iterations, loop_config.candidates_per_iter
    if pool.unlabeled_idx.size < T * C:
        raise ConfigError(
            f"pool has {pool.unlabeled_idx.size} unlabeled examples, {T * C} needed"
        )
    if pool.labeled_idx.size < 1:
        raise ConfigError("the initial labeled set is empty")
    note = trace or (lambda t, step: None)
    opt = dataclasses.replace(loop_config.optimizer, clean_adv_weight=loop_config.gamma)
    model = init_model(model_config, derive_seed(seed, _INIT))
    anchor = None
    test = pool.test
    records = []
    for t in range(1, T + 1):
        note(t, "train")
        adv = pool.adversarial_batch() if loop_config.adversarial_training else None
        try:
            model, train_loss = train(model, pool.labeled_batch(), adv, anchor, opt,
                                      derive_seed(seed, _TRAIN, t))
        except TrainingError as exc:
            raise TrainingError(f"active-learning iteration {t}: {exc}", t) from exc

        note(t, "select")
        pos = select(loop_config.acquisition, model, pool.unlabeled_inputs, pool.labeled_batch(),
                     opt, derive_seed(seed, _SELECT, t), k=C)
        chosen = pool.unlabeled_idx[pos]

        note(t, "label")
        revealed = label_oracle(pool, chosen)

        note(t, "consolidate")
        anchor = consolidate(model, pool.labeled_batch(), loop_config.lam, derive_seed(seed, _FISHER, t))

        note(t, "schedule")
        spec = schedule_attack(loop_config.schedule, t)
        if loop_config.adversarial_training:
            m = math.ceil(loop_config.attack_fraction * len(revealed))
            rows = np.sort(np.random.default_rng(derive_seed(seed, _SUBSET, t))
                           .choice(len(revealed), m, replace=False))
            part = Batch(revealed.inputs[rows], revealed.labels[rows])
            pool.adversarial_train_store.append(craft(model, part, spec, derive_seed(seed, _CRAFT, t)))

        note(t, "evaluate")
        clean = accuracy(model, test)
        robust = robust_accuracy(model, build_adversarial_test(model, test, spec, derive_seed(seed, _EVAL, t)))
        prev_robust = float("nan")
        if t > 1:
            prev = schedule_attack(loop_config.schedule, t - 1)
            prev_robust = robust_accuracy(
                model, build_adversarial_test(model, test, prev, derive_seed(seed, _EVAL, t - 1)))

        note(t, "remove")
        records.append(IterationRecord(t, spec.name, clean, robust, int(pool.labeled_idx.size),
                                       float(train_loss), int(seed), prev_robust))
    return records


def run_baseline(pool: LabelPool, model_config: ModelConfig, loop_config: LoopConfig,
                 strategy: str, seed: int, trace=None) -> list[IterationRecord]:
    """Same loop with lambda forced to 0 and the named acquisition strategy."""
    acq = dataclasses.replace(loop_config.acquisition, strategy=strategy)
    return run_roal(pool, model_config, loop_config.replace(lam=0.0, acquisition=acq), seed, trace)


def forgetting_probe(records) -> np.ndarray:
    """drop_t = robust_{t-1}(A_{t-1}) - robust_t(A_{t-1}) for t >= 2."""
    return np.array([records[i - 1].robust_accuracy - records[i].prev_attack_robust_accuracy
                     for i in range(1, len(records))], dtype=np.float64)
