"""Acquisition strategies over the unlabeled pool.

All selectors return positions into ``pool_inputs`` (not dataset indices).
Ties are broken towards the lower position.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError
from .model import Batch, ModelState, OptimizerConfig, forward, mc_forward, train

STRATEGIES = (
    "entropy",
    "random",
    "margin",
    "entropy_dropout",
    "bald",
    "expected_error_reduction",
    "cluster",
    "representative",
)


@dataclass(frozen=True)
class AcquisitionConfig:
    strategy: str = "entropy"
    k: int = 200
    mc_samples: int = 10
    eer_pool_cap: int = 20
    num_clusters: int = 10

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown acquisition strategy {self.strategy!r}")
        if self.k < 1 or self.mc_samples < 1 or self.eer_pool_cap < 1 or self.num_clusters < 1:
            raise ConfigError("k, mc_samples, eer_pool_cap and num_clusters must be >= 1")


def _entropy_of(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p), 0.0)
    return np.maximum(-terms.sum(axis=1), 0.0)


def entropy_scores(model: ModelState, pool_inputs) -> np.ndarray:
    return _entropy_of(forward(model, pool_inputs))


def _check_k(k, n):
    if not 1 <= k <= n:
        raise ContractError(f"cannot select k={k} from a pool of {n}")


def select_top_k(scores, k: int) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    _check_k(k, scores.size)
    # stable sort on the negated scores keeps lower indices first among ties
    return np.sort(np.argsort(-scores, kind="stable")[:k])


def select_random(pool_size: int, k: int, seed: int) -> np.ndarray:
    _check_k(k, pool_size)
    return np.sort(np.random.default_rng(seed).choice(pool_size, k, replace=False))


def margin_scores(model: ModelState, pool_inputs) -> np.ndarray:
    p = np.sort(forward(model, pool_inputs), axis=1)
    return -(p[:, -1] - p[:, -2])


def entropy_dropout_scores(model: ModelState, pool_inputs, mc_samples: int, seed: int) -> np.ndarray:
    if model.config.dropout_rate == 0.0:
        return entropy_scores(model, pool_inputs)
    return _entropy_of(np.mean(mc_forward(model, pool_inputs, mc_samples, seed), axis=0))


def bald_scores(model: ModelState, pool_inputs, mc_samples: int, seed: int) -> np.ndarray:
    """MC-dropout mutual information H[mean p] - mean H[p], clamped at 0."""
    if model.config.dropout_rate == 0.0:
        return np.zeros(np.atleast_2d(pool_inputs).shape[0])
    samples = mc_forward(model, pool_inputs, mc_samples, seed)
    return mutual_information(samples)


def mutual_information(samples) -> np.ndarray:
    samples = np.asarray(samples)
    h_mean = _entropy_of(samples.mean(axis=0))
    mean_h = np.mean([_entropy_of(p) for p in samples], axis=0)
    return np.maximum(h_mean - mean_h, 0.0)


def eer_score(model: ModelState, pool_inputs, labeled: Batch, candidate: int,
              opt: OptimizerConfig, seed: int) -> float:
    """Expected total pool entropy after labeling ``candidate`` and retraining one epoch."""
    X = np.asarray(pool_inputs, dtype=np.float64)
    x = X[candidate:candidate + 1]
    rest = np.delete(X, candidate, axis=0)
    probs = forward(model, x)[0]
    one_epoch = OptimizerConfig(1, opt.batch_size, opt.learning_rate, opt.clean_adv_weight)
    total = 0.0
    for c, pc in enumerate(probs):
        if pc == 0.0:
            continue
        aug = Batch(np.vstack([labeled.inputs, x]), np.append(labeled.labels, c))
        clone, _ = train(model, aug, opt=one_epoch, seed=seed)
        if rest.shape[0]:
            total += pc * float(entropy_scores(clone, rest).sum())
    return total


def select_expected_error_reduction(model: ModelState, pool_inputs, labeled: Batch, k: int,
                                    eer_pool_cap: int, opt: OptimizerConfig, seed: int) -> np.ndarray:
    X = np.atleast_2d(np.asarray(pool_inputs, dtype=np.float64))
    n = X.shape[0]
    _check_k(k, n)
    cap = max(min(eer_pool_cap, n), k)
    if cap < n:
        candidates = np.sort(np.random.default_rng(seed).choice(n, cap, replace=False))
    else:
        candidates = np.arange(n)
    scores = np.array([eer_score(model, X, labeled, int(i), opt, seed) for i in candidates])
    order = np.argsort(scores, kind="stable")[:k]
    return np.sort(candidates[order])


def kmeans(X, num_clusters: int, seed: int, max_iter: int = 50):
    """Lloyd's algorithm from distinct seeded initial points. Returns (assignments, centroids)."""
    X = np.asarray(X, dtype=np.float64)
    m = min(num_clusters, X.shape[0])
    rng = np.random.default_rng(seed)
    centroids = X[np.sort(rng.choice(X.shape[0], m, replace=False))].copy()
    assign = np.full(X.shape[0], -1)
    sq = (X * X).sum(axis=1, keepdims=True)
    for _ in range(max_iter):
        d = sq - 2.0 * X @ centroids.T + (centroids * centroids).sum(axis=1)
        new = np.argmin(d, axis=1)
        if np.array_equal(new, assign):
            break
        assign = new
        for j in range(m):
            members = assign == j
            if members.any():
                centroids[j] = X[members].mean(axis=0)
    return assign, centroids


def _round_robin(groups, k):
    """groups: per-cluster position lists in preference order, already sorted by priority."""
    picks = []
    depth = 0
    while len(picks) < k:
        progressed = False
        for g in groups:
            if depth < len(g):
                picks.append(g[depth])
                progressed = True
                if len(picks) == k:
                    break
        if not progressed:
            break
        depth += 1
    return np.sort(np.array(picks, dtype=np.int64))


def _clusters_by_size(assign, m):
    sizes = np.bincount(assign, minlength=m)
    order = sorted(range(m), key=lambda j: (-sizes[j], j))
    return [j for j in order if sizes[j] > 0]


def select_cluster_based(model: ModelState, pool_inputs, k: int, num_clusters: int, seed: int) -> np.ndarray:
    X = np.atleast_2d(np.asarray(pool_inputs, dtype=np.float64))
    _check_k(k, X.shape[0])
    scores = entropy_scores(model, X)
    assign, centroids = kmeans(X, num_clusters, seed)
    groups = []
    for j in _clusters_by_size(assign, len(centroids)):
        members = np.flatnonzero(assign == j)
        groups.append(members[np.argsort(-scores[members], kind="stable")].tolist())
    return _round_robin(groups, k)


def select_representative(model: ModelState, pool_inputs, k: int, num_clusters: int, seed: int) -> np.ndarray:
    X = np.atleast_2d(np.asarray(pool_inputs, dtype=np.float64))
    _check_k(k, X.shape[0])
    assign, centroids = kmeans(X, num_clusters, seed)
    groups = []
    for j in _clusters_by_size(assign, len(centroids)):
        members = np.flatnonzero(assign == j)
        d = ((X[members] - centroids[j]) ** 2).sum(axis=1)
        groups.append(members[np.argsort(d, kind="stable")].tolist())
    return _round_robin(groups, k)


def select(config: AcquisitionConfig, model: ModelState, pool_inputs, labeled: Batch,
           opt: OptimizerConfig, seed: int, k=None) -> np.ndarray:
    """Dispatch to the configured strategy."""
    k = config.k if k is None else k
    s = config.strategy
    if s == "random":
        return select_random(np.atleast_2d(pool_inputs).shape[0], k, seed)
    if s == "entropy":
        return select_top_k(entropy_scores(model, pool_inputs), k)
    if s == "margin":
        return select_top_k(margin_scores(model, pool_inputs), k)
    if s == "entropy_dropout":
        return select_top_k(entropy_dropout_scores(model, pool_inputs, config.mc_samples, seed), k)
    if s == "bald":
        return select_top_k(bald_scores(model, pool_inputs, config.mc_samples, seed), k)
    if s == "expected_error_reduction":
        return select_expected_error_reduction(model, pool_inputs, labeled, k, config.eer_pool_cap, opt, seed)
    if s == "cluster":
        return select_cluster_based(model, pool_inputs, k, config.num_clusters, seed)
    if s == "representative":
        return select_representative(model, pool_inputs, k, config.num_clusters, seed)
    raise ConfigError(f"unknown acquisition strategy {s!r}")
