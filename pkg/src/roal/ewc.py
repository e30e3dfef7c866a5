"""Elastic weight consolidation with a diagonal empirical Fisher."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ShapeError
from .model import Batch, ModelState, mean_squared_example_grad

FISHER_CAP = 2048


@dataclass(frozen=True, eq=False)
class EwcState:
    theta_star: np.ndarray
    fisher: np.ndarray
    lam: float

    def __post_init__(self):
        theta_star = np.array(self.theta_star, dtype=np.float64).ravel()
        fisher = np.array(self.fisher, dtype=np.float64).ravel()
        if theta_star.shape != fisher.shape:
            raise ShapeError("theta_star and fisher lengths differ")
        if np.any(fisher < 0):
            raise ContractError("fisher entries must be nonnegative")
        if self.lam < 0:
            raise ContractError("lambda must be nonnegative")
        theta_star.flags.writeable = False
        fisher.flags.writeable = False
        object.__setattr__(self, "theta_star", theta_star)
        object.__setattr__(self, "fisher", fisher)
        object.__setattr__(self, "lam", float(self.lam))

    def _delta(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != self.theta_star.shape:
            raise ShapeError(
                f"theta has length {theta.size}, state expects {self.theta_star.size}"
            )
        return theta - self.theta_star

    def penalty(self, theta) -> float:
        d = self._delta(theta)
        return float(0.5 * self.lam * np.sum(self.fisher * d * d))

    def penalty_grad(self, theta) -> np.ndarray:
        return self.lam * self.fisher * self._delta(theta)


def estimate_fisher(model: ModelState, labeled: Batch, cap: int = FISHER_CAP, seed: int = 0) -> np.ndarray:
    """Mean squared per-example gradient of the cross-entropy at the true labels.

    Sets larger than ``cap`` are uniformly subsampled without replacement.
    """
    if len(labeled) == 0:
        raise ContractError("cannot estimate Fisher information on an empty set")
    if len(labeled) > cap:
        idx = np.sort(np.random.default_rng(seed).choice(len(labeled), cap, replace=False))
        labeled = Batch(labeled.inputs[idx], labeled.labels[idx])
    return mean_squared_example_grad(model, labeled)


def penalty(state: EwcState, theta) -> float:
    return state.penalty(theta)


def penalty_grad(state: EwcState, theta) -> np.ndarray:
    return state.penalty_grad(theta)


def consolidate(model: ModelState, labeled: Batch, lam: float, seed: int = 0) -> EwcState:
    # replaces any previous anchor; penalties are never summed across iterations
    return EwcState(model.params.copy(), estimate_fisher(model, labeled, seed=seed), lam)
