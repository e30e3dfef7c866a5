"""INI-style experiment configuration.

Sections hold ``key = value`` pairs; ``#`` starts a comment line. Every key
has a documented default, unknown sections and keys are rejected.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from typing import Optional

from .acquisition import STRATEGIES, AcquisitionConfig
from .attacks import DEFAULT_EPSILON, DEFAULT_FAMILY_PARAMS, DEFAULT_ORDER, FAMILIES, NORM_ORDER, AttackSchedule, AttackSpec
from .errors import ConfigError
from .loop import LoopConfig
from .model import ModelConfig, OptimizerConfig


class ConfigSyntaxError(ConfigError):
    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass(frozen=True)
class DatasetSection:
    name: str = "blobs"
    n_train: int = 3000
    n_test: int = 1000
    num_classes: int = 4
    dim: int = 16
    spread: float = 0.3
    seed: Optional[int] = None  # None: each run uses its own run seed
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    limit_train: int = 0
    limit_test: int = 0


@dataclass(frozen=True)
class ModelSection:
    hidden_dims: tuple = (32,)
    dropout_rate: float = 0.0
    weight_init_scale: float = 1.0


@dataclass(frozen=True)
class LoopSection:
    iterations: int = 10
    candidates_per_iter: int = 200
    initial_labeled: int = 400
    lam: float = 0.5
    gamma: float = 1.0
    adversarial_training: bool = True
    attack_fraction: float = 1.0
    strategy: str = "entropy"
    mc_samples: int = 10
    eer_pool_cap: int = 20
    num_clusters: int = 10
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 0.1


@dataclass(frozen=True)
class OutputSection:
    directory: str = "results"
    formats: tuple = ("csv", "json")


@dataclass(frozen=True)
class ExperimentSection:
    repetitions: int = 1
    base_seed: int = 0
    workers: int = 1


def _default_specs():
    return {f: AttackSpec(f, DEFAULT_EPSILON[NORM_ORDER[f]]) for f in FAMILIES}


@dataclass(frozen=True)
class AttacksSection:
    order: tuple = DEFAULT_ORDER
    specs: dict = field(default_factory=_default_specs)


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSection = field(default_factory=DatasetSection)
    model: ModelSection = field(default_factory=ModelSection)
    loop: LoopSection = field(default_factory=LoopSection)
    attacks: AttacksSection = field(default_factory=AttacksSection)
    output: OutputSection = field(default_factory=OutputSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)

    @property
    def repetitions(self) -> int:
        return self.experiment.repetitions

    @property
    def base_seed(self) -> int:
        return self.experiment.base_seed

    def schedule(self) -> AttackSchedule:
        return AttackSchedule(tuple(self.attacks.specs[f] for f in self.attacks.order))

    def loop_config(self) -> LoopConfig:
        lp = self.loop
        return LoopConfig(
            iterations=lp.iterations,
            candidates_per_iter=lp.candidates_per_iter,
            lam=lp.lam,
            gamma=lp.gamma,
            adversarial_training=lp.adversarial_training,
            attack_fraction=lp.attack_fraction,
            acquisition=AcquisitionConfig(lp.strategy, lp.candidates_per_iter, lp.mc_samples,
                                          lp.eer_pool_cap, lp.num_clusters),
            schedule=self.schedule(),
            optimizer=OptimizerConfig(lp.epochs, lp.batch_size, lp.learning_rate, lp.gamma),
        )

    def model_config(self, input_dim: int, num_classes: int) -> ModelConfig:
        return ModelConfig(input_dim, self.model.hidden_dims, num_classes,
                           self.model.dropout_rate, "relu", self.model.weight_init_scale)

    @property
    def method(self) -> str:
        if self.loop.lam > 0:
            return "RoAL" if self.loop.strategy == "entropy" else f"RoAL-{self.loop.strategy}"
        return self.loop.strategy


_SECTIONS = {
    "dataset": DatasetSection,
    "model": ModelSection,
    "loop": LoopSection,
    "output": OutputSection,
    "experiment": ExperimentSection,
}

# config key -> dataclass field where they differ
_ALIASES = {("loop", "lambda"): "lam"}
_KEYS = {(s, f): k for (s, k), f in _ALIASES.items()}


def _key(section, fname):
    return _KEYS.get((section, fname), fname)


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_list(text):
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _convert(default, fname, text):
    if fname == "seed":
        return None if text.strip() in ("", "none") else int(text)
    if fname == "hidden_dims":
        return tuple(int(p) for p in _parse_list(text))
    if isinstance(default, bool):
        return _parse_bool(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        return _parse_list(text)
    return text.strip()


def _fmt(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _semantic(section, key, cond, message):
    if not cond:
        raise ConfigError(f"[{section}] {key}: {message}")


def validate_config(cfg: ExperimentConfig):
    d, lp, ex = cfg.dataset, cfg.loop, cfg.experiment
    _semantic("dataset", "name", d.name in ("blobs", "mnist", "fashion_mnist", "idx"),
              f"unknown dataset {d.name!r}")
    if d.name == "blobs":
        _semantic("dataset", "n_train", d.n_train >= 1, "must be >= 1")
        _semantic("dataset", "n_test", d.n_test >= 1, "must be >= 1")
        _semantic("dataset", "num_classes", d.num_classes >= 2, "must be >= 2")
        _semantic("dataset", "dim", d.dim >= 1, "must be >= 1")
        _semantic("dataset", "spread", d.spread >= 0, "must be >= 0")
    else:
        for k in ("train_images", "train_labels", "test_images", "test_labels"):
            _semantic("dataset", k, bool(getattr(d, k)), f"required for dataset {d.name!r}")
    _semantic("dataset", "limit_train", d.limit_train >= 0, "must be >= 0")
    _semantic("dataset", "limit_test", d.limit_test >= 0, "must be >= 0")
    _semantic("model", "hidden_dims", all(h >= 1 for h in cfg.model.hidden_dims), "entries must be >= 1")
    _semantic("model", "dropout_rate", 0 <= cfg.model.dropout_rate < 1, "must lie in [0, 1)")
    _semantic("model", "weight_init_scale", cfg.model.weight_init_scale > 0, "must be > 0")
    _semantic("loop", "iterations", lp.iterations >= 1, "must be >= 1")
    _semantic("loop", "candidates_per_iter", lp.candidates_per_iter >= 1, "must be >= 1")
    _semantic("loop", "initial_labeled", lp.initial_labeled >= 1, "must be >= 1")
    _semantic("loop", "lambda", lp.lam >= 0, "must be >= 0")
    _semantic("loop", "gamma", lp.gamma >= 0, "must be >= 0")
    _semantic("loop", "attack_fraction", 0 < lp.attack_fraction <= 1, "must lie in (0, 1]")
    _semantic("loop", "strategy", lp.strategy in STRATEGIES, f"unknown strategy {lp.strategy!r}")
    _semantic("loop", "mc_samples", lp.mc_samples >= 1, "must be >= 1")
    _semantic("loop", "eer_pool_cap", lp.eer_pool_cap >= 1, "must be >= 1")
    _semantic("loop", "num_clusters", lp.num_clusters >= 1, "must be >= 1")
    _semantic("loop", "epochs", lp.epochs >= 1, "must be >= 1")
    _semantic("loop", "batch_size", lp.batch_size >= 1, "must be >= 1")
    _semantic("loop", "learning_rate", lp.learning_rate > 0, "must be > 0")
    _semantic("attacks", "order", len(cfg.attacks.order) >= 1, "must name at least one attack")
    for f in cfg.attacks.order:
        _semantic("attacks", "order", f in cfg.attacks.specs, f"no spec for attack {f!r}")
    _semantic("output", "formats", set(cfg.output.formats) <= {"csv", "json"}, "allowed: csv, json")
    _semantic("experiment", "repetitions", ex.repetitions >= 1, "must be >= 1")
    _semantic("experiment", "workers", ex.workers >= 1, "must be >= 1")


def _make_parser():
    return configparser.ConfigParser(
        interpolation=None, delimiters=("=",), comment_prefixes=("#",),
        inline_comment_prefixes=None, empty_lines_in_values=False, default_section="\0defaults",
    )


def parse_config(text: str) -> ExperimentConfig:
    cp = _make_parser()
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigSyntaxError("key outside of any [section]", exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigSyntaxError("expected 'key = value'", line) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigSyntaxError(f"duplicate section [{exc.section}]", exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigSyntaxError(f"duplicate key {exc.option!r}", exc.lineno) from None
    except configparser.Error as exc:
        raise ConfigSyntaxError(str(exc)) from None

    parts = {}
    for sname, cls in _SECTIONS.items():
        base = cls()
        values = {}
        if cp.has_section(sname):
            known = {_key(sname, f.name): f.name for f in fields(cls)}
            for key, text_value in cp.items(sname):
                if key not in known:
                    raise ConfigError(f"[{sname}] unknown key {key!r}")
                fname = known[key]
                try:
                    values[fname] = _convert(getattr(base, fname), fname, text_value)
                except ValueError as exc:
                    raise ConfigError(f"[{sname}] {key}: {exc}") from None
        parts[sname] = cls(**values)

    parts["attacks"] = _parse_attacks(cp)
    for sname in cp.sections():
        if sname not in _SECTIONS and sname != "attacks" and not sname.startswith("attack."):
            raise ConfigError(f"unknown section [{sname}]")
    cfg = ExperimentConfig(**parts)
    validate_config(cfg)
    return cfg


_SPEC_KEYS = ("epsilon", "steps", "step_size")


def _parse_attacks(cp) -> AttacksSection:
    order = DEFAULT_ORDER
    if cp.has_section("attacks"):
        for key, value in cp.items("attacks"):
            if key != "order":
                raise ConfigError(f"[attacks] unknown key {key!r}")
            order = _parse_list(value)
            for f in order:
                if f not in FAMILIES:
                    raise ConfigError(f"[attacks] order: unknown attack family {f!r}")
    specs = _default_specs()
    for sname in cp.sections():
        if not sname.startswith("attack."):
            continue
        family = sname[len("attack."):]
        if family not in FAMILIES:
            raise ConfigError(f"unknown section [{sname}]")
        kw, extra = {}, {}
        for key, value in cp.items(sname):
            try:
                if key == "steps":
                    kw[key] = int(value)
                elif key in _SPEC_KEYS:
                    kw[key] = float(value)
                elif key in DEFAULT_FAMILY_PARAMS[family]:
                    extra[key] = float(value)
                else:
                    raise ConfigError(f"[{sname}] unknown key {key!r}")
            except ValueError as exc:
                raise ConfigError(f"[{sname}] {key}: {exc}") from None
        kw.setdefault("epsilon", DEFAULT_EPSILON[NORM_ORDER[family]])
        try:
            specs[family] = AttackSpec(family, family_params=extra, **kw)
        except ConfigError as exc:
            raise ConfigError(f"[{sname}] {exc}") from None
    return AttacksSection(order, specs)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Full INI text with every key written out."""
    lines = []
    for sname in ("dataset", "model", "loop"):
        section = getattr(cfg, sname)
        lines.append(f"[{sname}]")
        for f in fields(section):
            lines.append(f"{_key(sname, f.name)} = {_fmt(getattr(section, f.name))}")
        lines.append("")
    lines.append("[attacks]")
    lines.append(f"order = {_fmt(cfg.attacks.order)}")
    lines.append("")
    for family in FAMILIES:
        spec = cfg.attacks.specs[family]
        lines.append(f"[attack.{family}]")
        lines.append(f"epsilon = {spec.epsilon!r}")
        lines.append(f"steps = {spec.steps}")
        lines.append(f"step_size = {spec.step_size!r}")
        for k, v in spec.family_params.items():
            lines.append(f"{k} = {v!r}")
        lines.append("")
    for sname in ("output", "experiment"):
        section = getattr(cfg, sname)
        lines.append(f"[{sname}]")
        for f in fields(section):
            lines.append(f"{f.name} = {_fmt(getattr(section, f.name))}")
        lines.append("")
    return "\n".join(lines)
