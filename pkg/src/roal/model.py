"""Small numpy MLP classifier with exact backprop.

Parameters live in one flat vector; the layout is, layer by layer, the weight
matrix (fan_in x fan_out, row-major) followed by the bias vector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, ContractError, ShapeError, TrainingError

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    hidden_dims: tuple = ()
    num_classes: int = 2
    dropout_rate: float = 0.0
    activation: str = "relu"
    weight_init_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1:
            raise ConfigError("input_dim must be a positive integer")
        if any(h < 1 for h in self.hidden_dims):
            raise ConfigError("hidden_dims entries must be positive integers")
        if self.num_classes < 2:
            raise ConfigError("num_classes must be >= 2")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must lie in [0, 1)")
        if self.activation != "relu":
            raise ConfigError(f"unsupported activation {self.activation!r}")
        if not self.weight_init_scale > 0:
            raise ConfigError("weight_init_scale must be positive")

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        dims = [self.input_dim, *self.hidden_dims, self.num_classes]
        return list(zip(dims[:-1], dims[1:]))

    @property
    def param_count(self) -> int:
        return sum(i * o + o for i, o in self.layer_shapes)


@dataclass(frozen=True, eq=False)
class ModelState:
    config: ModelConfig
    params: np.ndarray

    def __post_init__(self):
        params = np.array(self.params, dtype=np.float64).ravel()
        if params.size != self.config.param_count:
            raise ShapeError(
                f"expected {self.config.param_count} parameters, got {params.size}"
            )
        if not np.all(np.isfinite(params)):
            raise ContractError("parameters must be finite")
        params.flags.writeable = False
        object.__setattr__(self, "params", params)

    @property
    def param_count(self) -> int:
        return self.params.size

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        out = []
        pos = 0
        for fan_in, fan_out in self.config.layer_shapes:
            W = self.params[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out)
            pos += fan_in * fan_out
            b = self.params[pos:pos + fan_out]
            pos += fan_out
            out.append((W, b))
        return out

    def with_params(self, params) -> "ModelState":
        return ModelState(self.config, params)


@dataclass(frozen=True, eq=False)
class Batch:
    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        y = np.asarray(self.labels, dtype=np.int64).ravel()
        if X.shape[0] != y.shape[0]:
            raise ShapeError(f"{X.shape[0]} input rows but {y.shape[0]} labels")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return self.labels.shape[0]

    @staticmethod
    def concat(*batches: "Batch") -> "Batch":
        batches = [b for b in batches if b is not None and len(b)]
        return Batch(
            np.concatenate([b.inputs for b in batches]),
            np.concatenate([b.labels for b in batches]),
        )


@dataclass(frozen=True)
class OptimizerConfig:
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 0.1
    clean_adv_weight: float = 1.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.clean_adv_weight < 0:
            raise ConfigError("clean_adv_weight must be >= 0")


def init_model(config: ModelConfig, seed: int) -> ModelState:
    """Uniform weights in [-s, s] with s = weight_init_scale / sqrt(fan_in); zero biases."""
    rng = np.random.default_rng(seed)
    chunks = []
    for fan_in, fan_out in config.layer_shapes:
        s = config.weight_init_scale / math.sqrt(fan_in)
        chunks.append(rng.uniform(-s, s, size=fan_in * fan_out))
        chunks.append(np.zeros(fan_out))
    return ModelState(config, np.concatenate(chunks))


def _check_inputs(model: ModelState, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.config.input_dim:
        raise ShapeError(
            f"inputs have {X.shape[1]} columns, model expects {model.config.input_dim}"
        )
    return X


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward_cache(model, X, dropout_mask=None):
    layers = model.layers()
    keep = 1.0 - model.config.dropout_rate
    acts, pre = [X], []
    h = X
    for i, (W, b) in enumerate(layers[:-1]):
        z = h @ W + b
        h = np.maximum(z, 0.0)
        if dropout_mask is not None:
            h = h * dropout_mask[i] / keep
        pre.append(z)
        acts.append(h)
    W, b = layers[-1]
    return h @ W + b, (acts, pre, dropout_mask)


def _backward(model, cache, dlogits):
    """Return (per-layer deltas, input cotangent) for a logit cotangent."""
    acts, pre, mask = cache
    layers = model.layers()
    keep = 1.0 - model.config.dropout_rate
    deltas = [None] * len(layers)
    delta = dlogits
    for i in range(len(layers) - 1, -1, -1):
        deltas[i] = delta
        da = delta @ layers[i][0].T
        if i > 0:
            if mask is not None:
                da = da * mask[i - 1] / keep
            delta = da * (pre[i - 1] > 0)
        else:
            delta = da
    return deltas, delta


def _assemble(acts, deltas, squared=False):
    chunks = []
    for a_in, d in zip(acts, deltas):
        if squared:
            a_in, d = a_in * a_in, d * d
        chunks.append((a_in.T @ d).ravel())
        chunks.append(d.sum(axis=0))
    return np.concatenate(chunks)


def logits(model: ModelState, inputs, dropout_mask=None) -> np.ndarray:
    X = _check_inputs(model, inputs)
    return _forward_cache(model, X, dropout_mask)[0]


def forward(model: ModelState, inputs, dropout_mask: Optional[Sequence] = None) -> np.ndarray:
    """Class probabilities. Without a mask dropout is disabled."""
    return softmax(logits(model, inputs, dropout_mask))


def predict(model: ModelState, inputs) -> np.ndarray:
    return np.argmax(logits(model, inputs), axis=1)


def _one_hot(labels, num_classes):
    out = np.zeros((labels.shape[0], num_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def _ce(probs, labels):
    p = probs[np.arange(labels.shape[0]), labels]
    return -np.log(np.maximum(p, PROB_FLOOR))


def loss(model: ModelState, batch: Batch) -> float:
    if len(batch) == 0:
        raise ContractError("loss of an empty batch")
    return float(_ce(forward(model, batch.inputs), batch.labels).mean())


def param_grad(model: ModelState, batch: Batch) -> np.ndarray:
    """Gradient of the mean cross-entropy with respect to the flat parameters."""
    if len(batch) == 0:
        raise ContractError("gradient of an empty batch")
    X = _check_inputs(model, batch.inputs)
    z, cache = _forward_cache(model, X)
    n = X.shape[0]
    dlogits = (softmax(z) - _one_hot(batch.labels, model.config.num_classes)) / n
    deltas, _ = _backward(model, cache, dlogits)
    return _assemble(cache[0], deltas)


def mean_squared_example_grad(model: ModelState, batch: Batch) -> np.ndarray:
    """(1/n) sum_k (dL_k/dtheta)^2 over per-example cross-entropy losses.

    Uses sum_k (a_ik d_jk)^2 = sum_k a_ik^2 d_jk^2, so no per-example
    gradient tensor is materialised.
    """
    if len(batch) == 0:
        raise ContractError("empty batch")
    X = _check_inputs(model, batch.inputs)
    z, cache = _forward_cache(model, X)
    dlogits = softmax(z) - _one_hot(batch.labels, model.config.num_classes)
    deltas, _ = _backward(model, cache, dlogits)
    return _assemble(cache[0], deltas, squared=True) / X.shape[0]


def logit_input_grad(model: ModelState, inputs, dlogits) -> np.ndarray:
    """Backpropagate a per-row logit cotangent to the inputs."""
    X = _check_inputs(model, inputs)
    _, cache = _forward_cache(model, X)
    return _backward(model, cache, np.asarray(dlogits, dtype=np.float64))[1]


def input_grads(model: ModelState, inputs, labels) -> np.ndarray:
    """Row i holds d CE(x_i, y_i) / d x_i."""
    X = _check_inputs(model, inputs)
    z, cache = _forward_cache(model, X)
    dlogits = softmax(z) - _one_hot(np.asarray(labels), model.config.num_classes)
    return _backward(model, cache, dlogits)[1]


def input_grad(model: ModelState, input, label: int) -> np.ndarray:
    return input_grads(model, np.asarray(input, dtype=np.float64)[None, :], [label])[0]


def _draw_masks(model, n, rng):
    keep = 1.0 - model.config.dropout_rate
    return [(rng.random((n, h)) < keep).astype(np.float64) for h in model.config.hidden_dims]


def mc_forward(model: ModelState, inputs, samples: int, seed: int) -> list[np.ndarray]:
    """Stochastic forward passes with independent dropout masks."""
    if samples < 1:
        raise ContractError("samples must be >= 1")
    X = _check_inputs(model, inputs)
    if model.config.dropout_rate == 0.0:
        p = forward(model, X)
        return [p.copy() for _ in range(samples)]
    rng = np.random.default_rng(seed)
    return [forward(model, X, _draw_masks(model, X.shape[0], rng)) for _ in range(samples)]


def _batch_objective_grad(model, X, y, rng):
    mask = _draw_masks(model, X.shape[0], rng) if model.config.dropout_rate > 0 else None
    z, cache = _forward_cache(model, X, mask)
    p = softmax(z)
    n = X.shape[0]
    value = _ce(p, y).mean()
    deltas, _ = _backward(model, cache, (p - _one_hot(y, model.config.num_classes)) / n)
    return value, _assemble(cache[0], deltas)


def train(model: ModelState, labeled: Batch, adversarial_augment: Optional[Batch] = None,
          ewc=None, opt: OptimizerConfig = OptimizerConfig(), seed: int = 0):
    """Mini-batch SGD on clean loss + gamma * adversarial loss + EWC penalty.

    One epoch sweeps the clean set once; the adversarial set is split over the
    same number of steps so it is also swept once. The EWC penalty enters as
    theta <- argmin_u |u - (theta - lr * g)|^2 / (2 lr) + penalty(u), the
    implicit form of its gradient step. Returns the new state and the mean
    objective over the final epoch.
    """
    if len(labeled) == 0:
        raise ContractError("training set is empty")
    rng = np.random.default_rng(seed)
    theta = model.params.copy()
    work = model.with_params(theta)
    n = len(labeled)
    steps = math.ceil(n / opt.batch_size)
    adv = adversarial_augment if adversarial_augment is not None and len(adversarial_augment) else None
    gamma = opt.clean_adv_weight
    use_ewc = ewc is not None
    final = float("nan")
    step_index = 0
    # overflow surfaces as a TrainingError below, not as a warning
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(opt.epochs):
            order = rng.permutation(n)
            adv_order = rng.permutation(len(adv)) if adv is not None else None
            adv_bs = math.ceil(len(adv) / steps) if adv is not None else 0
            total = 0.0
            for s in range(steps):
                idx = order[s * opt.batch_size:(s + 1) * opt.batch_size]
                value, grad = _batch_objective_grad(work, labeled.inputs[idx], labeled.labels[idx], rng)
                if adv is not None and gamma > 0:
                    aidx = adv_order[s * adv_bs:(s + 1) * adv_bs]
                    if aidx.size:
                        av, ag = _batch_objective_grad(work, adv.inputs[aidx], adv.labels[aidx], rng)
                        value += gamma * av
                        grad += gamma * ag
                if use_ewc:
                    value += ewc.penalty(theta)
                if not np.isfinite(value) or not np.all(np.isfinite(grad)):
                    raise TrainingError("non-finite training loss", step_index)
                if use_ewc:
                    # implicit step on the quadratic penalty: stable for any lambda * F
                    k = opt.learning_rate * ewc.lam * ewc.fisher
                    theta = (theta - opt.learning_rate * grad + k * ewc.theta_star) / (1.0 + k)
                else:
                    theta = theta - opt.learning_rate * grad
                if not np.all(np.isfinite(theta)):
                    raise TrainingError("parameters diverged", step_index)
                work = model.with_params(theta)
                total += value
                step_index += 1
            final = total / steps
    return work, float(final)
