"""JSON run configuration: parsing, validation, defaults, serialization.

A run config has four sections (scene, train, contrast, sampling) plus a
global ``seed`` and output directory ``out``. Unknown keys are rejected by
name; every omitted key takes its documented default. The global seed
derives all per-module RNG streams, so two runs with equal configs are
identical.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from .losses import ContrastConfig
from .sampling import SamplingConfig
from .scenes import SceneSpec
from .validation import seed_from


class ConfigError(ValueError):
    """Malformed, unknown, or invalid configuration input."""


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    """Optimizer schedule, model dims, and experiment plumbing."""

    learning_rate: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 0.0005
    iterations: int = 2000
    batch_size: int = 4
    loss_mode: str = "ce+pne"
    hidden_dim: int = 32
    embed_dim: int = 16
    train_scenes: int = 16
    eval_scenes: int = 1
    eval_every: int = 200

    def __post_init__(self):
        from .losses import LOSS_MODES

        if not np.isfinite(self.learning_rate) or self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if not np.isfinite(self.weight_decay) or self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"loss_mode must be one of {LOSS_MODES}, got {self.loss_mode!r}")
        if self.hidden_dim < 2 or self.embed_dim < 2:
            raise ValueError("hidden_dim and embed_dim must be >= 2")
        if self.train_scenes < 1 or self.eval_scenes < 1:
            raise ValueError("train_scenes and eval_scenes must be >= 1")
        if self.eval_every < 1:
            raise ValueError(f"eval_every must be >= 1, got {self.eval_every}")


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration of one experiment run."""

    scene: SceneSpec
    train: TrainConfig
    contrast: ContrastConfig
    sampling: SamplingConfig
    seed: int = 0
    out_dir: str = "run-out"


_SECTIONS = {
    "scene": SceneSpec,
    "train": TrainConfig,
    "contrast": ContrastConfig,
    "sampling": SamplingConfig,
}
_TOP_KEYS = set(_SECTIONS) | {"seed", "out"}


def _coerce(section: str, cls, raw: dict) -> dict:
    """Check key names against the section's fields and coerce basic types."""
    defaults = {f.name: f.default for f in dataclasses.fields(cls)}
    out = {}
    for key, value in raw.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key: {section}.{key}")
        default = defaults[key]
        try:
            if isinstance(default, bool):
                out[key] = bool(value)
            elif isinstance(default, int):
                if isinstance(value, float) and not value.is_integer():
                    raise ConfigError(
                        f"{section}.{key} must be an integer, got {value}"
                    )
                out[key] = int(value)
            elif isinstance(default, float):
                out[key] = float(value)
            elif key == "confusion_pairs":
                out[key] = tuple(tuple(int(c) for c in pair) for pair in value)
            else:
                out[key] = value
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid value for {section}.{key}: {value!r}") from exc
    return out


def parse_config(data: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a validated RunConfig from a JSON-style dict plus overrides.

    ``overrides`` uses the same nested layout and wins over ``data``.
    Raises ConfigError naming the offending key on any problem.
    """
    merged: dict = {}
    for source in (data or {}, overrides or {}):
        for key, value in source.items():
            if isinstance(value, dict):
                merged.setdefault(key, {})
                merged[key].update(value)
            else:
                merged[key] = value

    for key in merged:
        if key not in _TOP_KEYS:
            raise ConfigError(f"unknown config key: {key}")

    seed = merged.get("seed", 0)
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"seed must be a nonnegative integer, got {seed!r}")
    out_dir = merged.get("out", "run-out")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError(f"out must be a nonempty string, got {out_dir!r}")

    sections = {}
    for name, cls in _SECTIONS.items():
        raw = merged.get(name, {})
        if not isinstance(raw, dict):
            raise ConfigError(f"config section '{name}' must be an object")
        kwargs = _coerce(name, cls, raw)
        if name == "sampling" and "seed" not in kwargs:
            kwargs["seed"] = seed_from(seed, "sampling")
        try:
            sections[name] = cls(**kwargs)
        except ValueError as exc:
            raise ConfigError(f"{name}: {exc}") from exc

    return RunConfig(
        scene=sections["scene"],
        train=sections["train"],
        contrast=sections["contrast"],
        sampling=sections["sampling"],
        seed=int(seed),
        out_dir=out_dir,
    )


def config_to_dict(config: RunConfig) -> dict:
    """Serialize a RunConfig back to its JSON-style dict form."""
    out = {"seed": config.seed, "out": config.out_dir}
    for name in _SECTIONS:
        section = getattr(config, name if name != "scene" else "scene")
        d = dataclasses.asdict(section)
        if "confusion_pairs" in d:
            d["confusion_pairs"] = [list(p) for p in d["confusion_pairs"]]
        out[name] = d
    return out


def load_config_file(path) -> dict:
    """Read a JSON config file, mapping I/O and syntax problems to ConfigError."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a JSON object, got {type(data).__name__}")
    return data
