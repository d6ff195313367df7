"""Experiment configuration: a flat, human-editable ``key = value`` file.

Lines are ``key = value``; blank lines and lines starting with ``#`` are
ignored. Every key is typed and validated against the schema below; unknown
or duplicate keys are rejected. Parsing then serializing then parsing again
yields an identical config, and the SHA-256 of the canonical serialization
serves as the run's config digest in metrics output.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, fields as dataclass_fields
from pathlib import Path

import numpy as np

from .exceptions import ConfigError


def _parse_int(s: str) -> int:
    return int(s)


def _parse_float(s: str) -> float:
    return float(s)


def _parse_str(s: str) -> str:
    return s


def _parse_int_list(s: str) -> tuple[int, ...]:
    if not s.strip():
        return ()
    return tuple(int(part) for part in s.split(","))


def _parse_threshold(s: str):
    if s.strip().lower() == "auto":
        return None
    return float(s)


def _fmt(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _positive(name):
    def check(v):
        if not np.isfinite(v) or v <= 0:
            raise ConfigError(f"{name} must be positive and finite, got {v}")

    return check


def _non_negative(name):
    def check(v):
        if isinstance(v, float) and not np.isfinite(v):
            raise ConfigError(f"{name} must be finite, got {v}")
        if v < 0:
            raise ConfigError(f"{name} must be non-negative, got {v}")

    return check


def _at_least(name, lo):
    def check(v):
        if v < lo:
            raise ConfigError(f"{name} must be at least {lo}, got {v}")

    return check


def _choice(name, options):
    def check(v):
        if v not in options:
            raise ConfigError(f"{name} must be one of {sorted(options)}, got {v!r}")

    return check


def _no_check(v):
    return None


# name -> (parser, default, validator); declaration order is the canonical
# serialization order.
_SCHEMA = {
    "task": (_parse_str, "blob", _choice("task", {"blob", "idx"})),
    "classes": (_parse_int, 4, _at_least("classes", 2)),
    "dim": (_parse_int, 16, _at_least("dim", 1)),
    "train_samples": (_parse_int, 2000, _at_least("train_samples", 1)),
    "test_samples": (_parse_int, 2000, _non_negative("test_samples")),
    "separation": (_parse_float, 6.0, _non_negative("separation")),
    "idx_images": (_parse_str, "", _no_check),
    "idx_labels": (_parse_str, "", _no_check),
    "idx_test_images": (_parse_str, "", _no_check),
    "idx_test_labels": (_parse_str, "", _no_check),
    "teacher_hidden": (_parse_int_list, (32, 32), _no_check),
    "student_hidden": (_parse_int_list, (16,), _no_check),
    "generator_hidden": (_parse_int_list, (64, 32), _no_check),
    "noise_dim": (_parse_int, 64, _at_least("noise_dim", 1)),
    "epsilon": (_parse_float, 1.0, _positive("epsilon")),
    "stages": (_parse_int, 8, _at_least("stages", 1)),
    "samples_per_stage": (_parse_int, 500, _at_least("samples_per_stage", 1)),
    "student_epochs_per_stage": (
        _parse_int,
        5,
        _non_negative("student_epochs_per_stage"),
    ),
    "alpha": (_parse_float, 5.0, _non_negative("alpha")),
    "beta": (_parse_float, 10.0, _non_negative("beta")),
    "ce_weight": (_parse_float, 1.0, _non_negative("ce_weight")),
    "threshold": (_parse_threshold, None, _no_check),
    "seed": (_parse_int, 0, _no_check),
    "teacher_epochs": (_parse_int, 30, _non_negative("teacher_epochs")),
    "teacher_lr": (_parse_float, 1e-3, _positive("teacher_lr")),
    "generator_pretrain_steps": (
        _parse_int,
        400,
        _non_negative("generator_pretrain_steps"),
    ),
    "generator_finetune_steps": (
        _parse_int,
        25,
        _non_negative("generator_finetune_steps"),
    ),
    "generator_lr": (_parse_float, 1e-3, _positive("generator_lr")),
    "student_lr": (_parse_float, 1e-3, _positive("student_lr")),
    "batch_size": (_parse_int, 64, _at_least("batch_size", 1)),
    "out_dir": (_parse_str, "runs/default", _no_check),
}


@dataclass(frozen=True)
class ExperimentConfig:
    task: str = "blob"
    classes: int = 4
    dim: int = 16
    train_samples: int = 2000
    test_samples: int = 2000
    separation: float = 6.0
    idx_images: str = ""
    idx_labels: str = ""
    idx_test_images: str = ""
    idx_test_labels: str = ""
    teacher_hidden: tuple[int, ...] = (32, 32)
    student_hidden: tuple[int, ...] = (16,)
    generator_hidden: tuple[int, ...] = (64, 32)
    noise_dim: int = 64
    epsilon: float = 1.0
    stages: int = 8
    samples_per_stage: int = 500
    student_epochs_per_stage: int = 5
    alpha: float = 5.0
    beta: float = 10.0
    ce_weight: float = 1.0
    threshold: float | None = None
    seed: int = 0
    teacher_epochs: int = 30
    teacher_lr: float = 1e-3
    generator_pretrain_steps: int = 400
    generator_finetune_steps: int = 25
    generator_lr: float = 1e-3
    student_lr: float = 1e-3
    batch_size: int = 64
    out_dir: str = "runs/default"

    def __post_init__(self):
        for name, (_, _, validate) in _SCHEMA.items():
            validate(getattr(self, name))
        if self.threshold is not None and not (0.0 <= self.threshold < 1.0):
            raise ConfigError(
                f"threshold must be in [0, 1) or auto, got {self.threshold}"
            )

    @classmethod
    def parse(cls, text: str) -> "ExperimentConfig":
        values = {}
        unknown: list[str] = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value': {raw!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _SCHEMA:
                unknown.append(key)
                continue
            if key in values:
                raise ConfigError(f"duplicate key {key!r} (line {lineno})")
            parser = _SCHEMA[key][0]
            try:
                values[key] = parser(value)
            except ConfigError:
                raise
            except Exception:
                raise ConfigError(
                    f"line {lineno}: cannot parse {key} = {value!r}"
                ) from None
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**values)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        return cls.parse(path.read_text())

    def serialize(self) -> str:
        lines = [f"{name} = {_fmt(getattr(self, name))}" for name in _SCHEMA]
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()[:16]

    def save(self, path) -> None:
        Path(path).write_text(self.serialize())

    def replace(self, **changes) -> "ExperimentConfig":
        current = {f.name: getattr(self, f.name) for f in dataclass_fields(self)}
        current.update(changes)
        return ExperimentConfig(**current)

    @property
    def threshold_value(self) -> float:
        if self.threshold is not None:
            return self.threshold
        return 1.0 / (2.0 * self.classes)


def resolve_out_dir(out_dir: str) -> Path:
    """Run output directory; DPDISTILL_OUT_ROOT re-roots relative paths."""
    root = os.environ.get("DPDISTILL_OUT_ROOT", "")
    path = Path(out_dir)
    if root and not path.is_absolute():
        return Path(root) / path
    return path
