"""Seed-averaged sweeps over stage count, data amount and loss terms.

Each sweep fixes the total synthetic budget where that is the controlled
variable and reports per-seed final student accuracies, so callers can
compare means against seed spread.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .datasets import make_task_data
from .pipeline import run_pipeline


@dataclass(frozen=True)
class SweepPoint:
    label: str
    accuracies: tuple[float, ...]
    teacher_accuracies: tuple[float, ...]

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))


def run_seeded(cfg: ExperimentConfig, seeds) -> SweepPoint:
    """Run the pipeline once per seed on that seed's own data draw."""
    accs, teacher_accs = [], []
    for seed in seeds:
        run_cfg = cfg.replace(seed=int(seed))
        x_train, y_train, x_test, y_test = make_task_data(run_cfg)
        result = run_pipeline(run_cfg, x_train, y_train, x_test, y_test)
        accs.append(result.student_accuracy)
        teacher_accs.append(result.teacher_accuracy)
    return SweepPoint(
        label=f"eps={cfg.epsilon} T={cfg.stages} n={cfg.stages * cfg.samples_per_stage}",
        accuracies=tuple(accs),
        teacher_accuracies=tuple(teacher_accs),
    )


def stage_sweep(cfg: ExperimentConfig, stage_counts, seeds) -> dict[int, SweepPoint]:
    """Vary the stage count at a fixed total synthetic budget."""
    total = cfg.stages * cfg.samples_per_stage
    out = {}
    for t in stage_counts:
        if total % t:
            raise ValueError(f"total budget {total} not divisible by T={t}")
        out[t] = run_seeded(
            cfg.replace(stages=t, samples_per_stage=total // t), seeds
        )
    return out


def data_sweep(cfg: ExperimentConfig, totals, seeds) -> dict[int, SweepPoint]:
    """Vary the total synthetic budget at a fixed stage count."""
    out = {}
    for total in totals:
        if total % cfg.stages:
            raise ValueError(f"total {total} not divisible by T={cfg.stages}")
        out[total] = run_seeded(
            cfg.replace(samples_per_stage=total // cfg.stages), seeds
        )
    return out


def ablation_sweep(cfg: ExperimentConfig, seeds) -> dict[str, SweepPoint]:
    """Full loss versus each generator-loss term zeroed in turn."""
    variants = {
        "full": cfg,
        "no_ce": cfg.replace(ce_weight=0.0),
        "no_ie": cfg.replace(alpha=0.0),
        "no_norm": cfg.replace(beta=0.0),
    }
    return {name: run_seeded(variant, seeds) for name, variant in variants.items()}
