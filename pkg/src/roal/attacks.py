"""White-box gradient attacks and the per-iteration attack schedule.

Every attack is a pure function of (model, batch, spec, seed). Outputs stay in
[0, 1] and inside the epsilon ball of the family's norm around the clean input.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, ContractError
from .model import Batch, ModelState, input_grads, logit_input_grad, logits, predict, softmax

FAMILIES = ("pgd", "pgd_l2", "jitter", "vni_fgsm", "fab")

NORM_ORDER = {"pgd": "inf", "jitter": "inf", "vni_fgsm": "inf", "pgd_l2": "two", "fab": "two"}

DISPLAY_NAMES = {"pgd": "PGD", "jitter": "Jitter", "fab": "FAB", "vni_fgsm": "VNI", "pgd_l2": "PGDL2"}

DEFAULT_EPSILON = {"inf": 0.3, "two": 1.0}

DEFAULT_FAMILY_PARAMS = {
    "pgd": {"random_start": 1.0},
    "pgd_l2": {},
    "jitter": {"random_start": 1.0, "jitter_scale": 10.0, "noise_std": 0.1},
    "vni_fgsm": {"momentum": 1.0, "samples": 5.0, "beta": 1.5},
    "fab": {"eta": 1.05, "alpha_max": 0.1, "beta": 0.9},
}

# the fixed dynamic order used for reproducible runs
DEFAULT_ORDER = ("pgd", "jitter", "fab", "vni_fgsm", "pgd_l2")


@dataclass(frozen=True)
class AttackSpec:
    family: str
    epsilon: float
    steps: int = 10
    step_size: Optional[float] = None
    family_params: dict = field(default_factory=dict)
    norm_order: Optional[str] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown attack family {self.family!r}")
        expected = NORM_ORDER[self.family]
        if self.norm_order is None:
            object.__setattr__(self, "norm_order", expected)
        elif self.norm_order != expected:
            raise ConfigError(f"{self.family} requires norm_order={expected}")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.step_size is None:
            object.__setattr__(self, "step_size", 2.5 * self.epsilon / self.steps)
        elif not self.step_size > 0:
            raise ConfigError("step_size must be positive")
        unknown = set(self.family_params) - set(DEFAULT_FAMILY_PARAMS[self.family])
        if unknown:
            raise ConfigError(f"unknown {self.family} parameter(s): {sorted(unknown)}")
        params = {**DEFAULT_FAMILY_PARAMS[self.family], **self.family_params}
        object.__setattr__(self, "family_params", {k: float(v) for k, v in params.items()})

    @property
    def name(self) -> str:
        return DISPLAY_NAMES[self.family]


def default_spec(family: str, epsilon: Optional[float] = None, steps: int = 10) -> AttackSpec:
    if family not in FAMILIES:
        raise ConfigError(f"unknown attack family {family!r}")
    eps = DEFAULT_EPSILON[NORM_ORDER[family]] if epsilon is None else epsilon
    return AttackSpec(family, eps, steps=steps)


@dataclass(frozen=True)
class AttackSchedule:
    sequence: tuple

    def __post_init__(self):
        object.__setattr__(self, "sequence", tuple(self.sequence))

    def __len__(self):
        return len(self.sequence)

    @classmethod
    def default(cls, epsilon_inf: float = 0.3, epsilon_two: float = 1.0, steps: int = 10):
        eps = {"inf": epsilon_inf, "two": epsilon_two}
        return cls(tuple(AttackSpec(f, eps[NORM_ORDER[f]], steps=steps) for f in DEFAULT_ORDER))


def schedule_attack(schedule: AttackSchedule, t: int) -> AttackSpec:
    if len(schedule.sequence) == 0:
        raise ConfigError("attack schedule is empty")
    if t < 1:
        raise ContractError("iteration index starts at 1")
    return schedule.sequence[(t - 1) % len(schedule.sequence)]


def _clip01(x):
    return np.clip(x, 0.0, 1.0)


def project_linf(x, x0, eps):
    return np.clip(x, x0 - eps, x0 + eps)


def project_l2(x, x0, eps):
    d = x - x0
    n = np.linalg.norm(d, axis=1, keepdims=True)
    scale = np.minimum(1.0, eps / np.maximum(n, 1e-300))
    return x0 + d * scale


def _random_start(x0, eps, rng, enabled):
    if not enabled:
        return x0.copy()
    return _clip01(x0 + rng.uniform(-eps, eps, size=x0.shape))


def _signed_linf_loop(x0, spec, rng, grad_fn):
    eps, alpha = spec.epsilon, spec.step_size
    x = _random_start(x0, eps, rng, spec.family_params.get("random_start", 0.0) != 0.0)
    for _ in range(spec.steps):
        x = _clip01(project_linf(x + alpha * np.sign(grad_fn(x)), x0, eps))
    return x


def attack_pgd(model: ModelState, batch: Batch, spec: AttackSpec, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return _signed_linf_loop(batch.inputs, spec, rng, lambda x: input_grads(model, x, batch.labels))


def attack_pgd_l2(model: ModelState, batch: Batch, spec: AttackSpec, seed: int) -> np.ndarray:
    x0 = batch.inputs
    x = x0.copy()
    for _ in range(spec.steps):
        g = input_grads(model, x, batch.labels)
        n = np.linalg.norm(g, axis=1, keepdims=True)
        step = np.divide(g, n, out=np.zeros_like(g), where=n > 0)
        x = project_l2(_clip01(x + spec.step_size * step), x0, spec.epsilon)
    return x


def jitter_objective(z, labels, scale, noise):
    """Per-row MSE between noisy softmax(scale * z / ||z||_2) and the one-hot target."""
    n, c = z.shape
    nz = np.maximum(np.linalg.norm(z, axis=1, keepdims=True), 1e-12)
    s = softmax(scale * z / nz)
    target = np.zeros_like(z)
    target[np.arange(n), labels] = 1.0
    return np.mean((s + noise - target) ** 2, axis=1)


def jitter_logit_grad(z, labels, scale, noise):
    """Gradient of ``jitter_objective`` (summed over rows) with respect to the logits."""
    n, c = z.shape
    nz = np.maximum(np.linalg.norm(z, axis=1, keepdims=True), 1e-12)
    s = softmax(scale * z / nz)
    target = np.zeros_like(z)
    target[np.arange(n), labels] = 1.0
    g_s = 2.0 * (s + noise - target) / c
    g_u = s * (g_s - np.sum(g_s * s, axis=1, keepdims=True))
    return scale * (g_u / nz - z * np.sum(z * g_u, axis=1, keepdims=True) / nz**3)


def attack_jitter(model: ModelState, batch: Batch, spec: AttackSpec, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    scale = spec.family_params["jitter_scale"]
    std = spec.family_params["noise_std"]

    def grad(x):
        z = logits(model, x)
        noise = std * rng.standard_normal(z.shape) if std > 0 else 0.0
        return logit_input_grad(model, x, jitter_logit_grad(z, batch.labels, scale, noise))

    return _signed_linf_loop(batch.inputs, spec, rng, grad)


def attack_vni_fgsm(model: ModelState, batch: Batch, spec: AttackSpec, seed: int) -> np.ndarray:
    """Variance-tuned Nesterov iterative FGSM."""
    rng = np.random.default_rng(seed)
    mu = spec.family_params["momentum"]
    k = int(spec.family_params["samples"])
    radius = spec.family_params["beta"] * spec.epsilon
    eps, alpha = spec.epsilon, spec.step_size
    x0 = batch.inputs
    x = x0.copy()
    g = np.zeros_like(x0)
    v = np.zeros_like(x0)
    for _ in range(spec.steps):
        g_hat = input_grads(model, x + alpha * mu * g, batch.labels)
        t = g_hat + v
        n1 = np.abs(t).sum(axis=1, keepdims=True)
        g = mu * g + np.divide(t, n1, out=np.zeros_like(t), where=n1 > 0)
        if k > 0:
            acc = np.zeros_like(x0)
            for _ in range(k):
                acc += input_grads(model, x + rng.uniform(-radius, radius, size=x.shape), batch.labels)
            v = acc / k - g_hat
        x = _clip01(project_linf(x + alpha * np.sign(g), x0, eps))
    return x


def project_onto_hyperplane(points, w, b):
    """Displacement taking each row of ``points`` onto {u : w.u + b = 0} in L2."""
    wn2 = np.sum(w * w, axis=1, keepdims=True)
    r = np.sum(w * points, axis=1, keepdims=True) + b.reshape(-1, 1)
    return np.divide(-r, wn2, out=np.zeros_like(r), where=wn2 > 0) * w


def _boundary_linearization(model, x, labels):
    """Closest linearized boundary between each row's label class and any other class."""
    n = x.shape[0]
    c = model.config.num_classes
    z = logits(model, x)
    rows = np.arange(n)
    df = z - z[rows, labels][:, None]
    dg = np.empty((n, c, x.shape[1]))
    for cls in range(c):
        cot = np.zeros_like(z)
        cot[:, cls] += 1.0
        cot[rows, labels] -= 1.0
        dg[:, cls] = logit_input_grad(model, x, cot)
    dist = np.abs(df) / (1e-12 + np.linalg.norm(dg, axis=2))
    dist[rows, labels] = np.inf
    nearest = np.argmin(dist, axis=1)
    w = dg[rows, nearest]
    b = df[rows, nearest] - np.sum(w * x, axis=1)
    return w, b


def attack_fab(model: ModelState, batch: Batch, spec: AttackSpec, seed: int) -> np.ndarray:
    """Single-run L2 FAB with biased projections and an explicit epsilon cap."""
    eta = spec.family_params["eta"]
    alpha_max = spec.family_params["alpha_max"]
    back = spec.family_params["beta"]
    eps = spec.epsilon
    x_clean = batch.inputs
    out = x_clean.copy()
    active = np.flatnonzero(predict(model, x_clean) == batch.labels)
    if active.size == 0:
        return out
    x0 = x_clean[active]
    y = batch.labels[active]
    x = x0.copy()
    best = x0.copy()
    best_norm = np.full(active.size, np.inf)
    direction = np.zeros_like(x0)
    for _ in range(spec.steps):
        w, b = _boundary_linearization(model, x, y)
        d1 = project_onto_hyperplane(x, w, b)
        d2 = project_onto_hyperplane(x0, w, b)
        direction = d2
        a1 = np.maximum(np.linalg.norm(d1, axis=1, keepdims=True), 1e-8)
        a2 = np.maximum(np.linalg.norm(d2, axis=1, keepdims=True), 1e-8)
        mix = np.clip(a1 / (a1 + a2), 0.0, alpha_max)
        x = _clip01((x + eta * d1) * (1 - mix) + (x0 + eta * d2) * mix)
        adv = predict(model, x) != y
        if adv.any():
            dist = np.linalg.norm(x - x0, axis=1)
            better = adv & (dist < best_norm)
            best[better] = x[better]
            best_norm[better] = dist[better]
            x[adv] = x0[adv] + (x[adv] - x0[adv]) * back
    found = np.isfinite(best_norm)
    res = np.empty_like(x0)
    res[found] = project_l2(best[found], x0[found], eps)
    dn = np.linalg.norm(direction, axis=1, keepdims=True)
    unit = np.divide(direction, dn, out=np.zeros_like(direction), where=dn > 0)
    res[~found] = (x0 + eps * unit)[~found]
    out[active] = _clip01(res)
    return out


ATTACKS = {
    "pgd": attack_pgd,
    "pgd_l2": attack_pgd_l2,
    "jitter": attack_jitter,
    "vni_fgsm": attack_vni_fgsm,
    "fab": attack_fab,
}


def craft(model: ModelState, batch: Batch, spec: AttackSpec, seed: int,
          target_labels=None) -> Batch:
    """Adversarial copy of ``batch``; labels are preserved.

    ``target_labels`` replaces the labels the attack ascends on (e.g. model
    predictions when true labels are withheld).
    """
    try:
        fn = ATTACKS[spec.family]
    except KeyError:
        raise ConfigError(f"unknown attack family {spec.family!r}") from None
    if len(batch) == 0:
        return batch
    work = batch if target_labels is None else Batch(batch.inputs, target_labels)
    return Batch(fn(model, work, spec, seed), batch.labels)
