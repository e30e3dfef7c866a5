"""Paired lambda comparison on synthetic blobs under the dynamic attack schedule."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .acquisition import AcquisitionConfig
from .attacks import AttackSchedule
from .data import make_blobs_split, split_pool
from .loop import LoopConfig, forgetting_probe, run_roal
from .model import ModelConfig, OptimizerConfig


@dataclass(frozen=True)
class DeskSetup:
    n_train: int = 2000
    n_test: int = 1000
    num_classes: int = 4
    dim: int = 16
    spread: float = 0.3
    iterations: int = 5
    candidates: int = 20
    initial_labeled: int = 100
    epsilon: float = 0.1
    hidden_dims: tuple = (32,)
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 0.1


@dataclass
class DeskResult:
    lam: float
    final_robust: np.ndarray  # (seeds,)
    drops: np.ndarray  # (seeds, iterations - 1)

    @property
    def mean_final_robust(self) -> float:
        return float(self.final_robust.mean())

    @property
    def mean_drop(self) -> float:
        return float(self.drops.mean())

    @property
    def mean_drop_by_switch(self) -> np.ndarray:
        return self.drops.mean(axis=0)


def desk_run(lam: float, seeds=range(10), setup: DeskSetup = DeskSetup()) -> DeskResult:
    """One loop per seed; the same epsilon for every attack family."""
    finals, drops = [], []
    loop = LoopConfig(
        iterations=setup.iterations, candidates_per_iter=setup.candidates, lam=lam,
        acquisition=AcquisitionConfig(k=setup.candidates),
        schedule=AttackSchedule.default(setup.epsilon, setup.epsilon),
        optimizer=OptimizerConfig(setup.epochs, setup.batch_size, setup.learning_rate),
    )
    model = ModelConfig(setup.dim, setup.hidden_dims, setup.num_classes)
    for s in seeds:
        train, test = make_blobs_split(setup.n_train, setup.n_test, setup.num_classes,
                                       setup.dim, setup.spread, s)
        records = run_roal(split_pool(train, test, setup.initial_labeled, s), model, loop, s)
        finals.append(records[-1].robust_accuracy)
        drops.append(forgetting_probe(records))
    return DeskResult(lam, np.array(finals), np.array(drops))
