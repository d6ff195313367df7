"""Generator training against a frozen classifier.

The pretrained classifier (the "teacher") acts as a fixed discriminator:
its parameters are never updated here, only read. The generator is trained
to minimize a three-term objective on its synthetic batch x:

  confidence   cross-entropy of the teacher's prediction against its own
               argmax class, pushing samples the teacher is sure about;
  balance      alpha * sum(p_bar log p_bar) for the batch-mean prediction
               p_bar, pushing the batch toward uniform class coverage;
  statistics   beta * sum over normalization layers of
               ||batch_mean - running_mean||_2 + ||batch_var - running_var||_2,
               anchoring synthetic activation statistics to the statistics
               the teacher accumulated on its training data.

The total and the three raw terms are reported separately so any weight can
be zeroed for ablation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import TrainingDivergedError
from .nn.functional import softmax
from .nn.losses import (
    cross_entropy_from_logits,
    mean_prediction_negentropy,
    softmax_backward,
)
from .nn.network import Network
from .nn.optim import Adam, step_network


@dataclass(frozen=True)
class GeneratorLossWeights:
    """Term weights; ``ce`` exists so the confidence term can be ablated."""

    alpha: float = 5.0
    beta: float = 10.0
    ce: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "ce"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be non-negative and finite, got {v}")


@dataclass(frozen=True)
class NoiseSpec:
    """Standard-normal latent input; ``dim`` is fixed for a generator's life."""

    dim: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("noise dim must be positive")

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal((n, self.dim)).astype(np.float32)


@dataclass(frozen=True)
class GeneratorLossTerms:
    ce: float
    ie: float
    norm: float
    total: float

    def row(self) -> dict:
        return {
            "ce_term": self.ce,
            "ie_term": self.ie,
            "norm_term": self.norm,
            "total": self.total,
        }


def _capture_batchnorm_inputs(teacher: Network, batch: np.ndarray):
    """Eval-mode teacher forward keeping each normalization layer's input."""
    logits = teacher.forward(batch, training=False, capture_inputs=True)
    bn_inputs = [
        (idx, layer, teacher.layer_inputs[idx])
        for idx, layer in teacher.batchnorm_layers()
    ]
    return logits, bn_inputs


def _require_populated_stats(teacher: Network) -> None:
    bn = teacher.batchnorm_layers()
    if not bn:
        raise RuntimeError(
            "teacher has no normalization layers; the statistics term needs "
            "at least one"
        )
    if all(layer.batches_tracked == 0 for _, layer in bn):
        raise RuntimeError(
            "teacher normalization statistics are empty; pretrain the teacher "
            "on labeled data before training a generator against it"
        )


def statistics_norm(teacher: Network, batch: np.ndarray) -> float:
    """Distance between the batch's activation statistics and the running ones.

    Sum over normalization layers of the Euclidean norms of the mean gap and
    the (biased) variance gap, measured at each layer's input.
    """
    value, _ = _statistics_norm_with_taps(teacher, batch)
    return value


def _statistics_norm_with_taps(teacher: Network, batch: np.ndarray):
    _require_populated_stats(teacher)
    _, bn_inputs = _capture_batchnorm_inputs(teacher, batch)
    return _norm_terms_from_inputs(bn_inputs, batch.shape[0])


def _norm_terms_from_inputs(bn_inputs, batch_size: int):
    """Value and per-layer input gradients of the statistics term."""
    total = 0.0
    taps: dict[int, np.ndarray] = {}
    for idx, layer, x in bn_inputs:
        mean_gap = x.mean(axis=0) - layer.running_mean
        var_gap = x.var(axis=0) - layer.running_var
        mean_norm = float(np.linalg.norm(mean_gap))
        var_norm = float(np.linalg.norm(var_gap))
        total += mean_norm + var_norm
        grad = np.zeros_like(x)
        if mean_norm > 0.0:
            grad += (mean_gap / mean_norm) / batch_size
        if var_norm > 0.0:
            centered = x - x.mean(axis=0)
            grad += (var_gap / var_norm) * 2.0 * centered / batch_size
        taps[idx] = grad.astype(x.dtype)
    return total, taps


def generator_loss(
    teacher: Network,
    synthetic_batch: np.ndarray,
    weights: GeneratorLossWeights = GeneratorLossWeights(),
) -> GeneratorLossTerms:
    """Evaluate the three-term objective on a synthetic batch."""
    terms, _ = generator_loss_with_input_grad(teacher, synthetic_batch, weights)
    return terms


def generator_loss_with_input_grad(
    teacher: Network,
    synthetic_batch: np.ndarray,
    weights: GeneratorLossWeights = GeneratorLossWeights(),
) -> tuple[GeneratorLossTerms, np.ndarray]:
    """Loss terms plus the exact gradient w.r.t. the synthetic batch.

    The gradient flows through the frozen teacher: confidence and balance
    terms enter at the logits, the statistics term is injected at each
    normalization layer's input. Teacher parameters are read, never written.
    """
    batch = np.asarray(synthetic_batch)
    if batch.size == 0:
        raise ValueError("synthetic batch is empty")
    if not np.all(np.isfinite(batch)):
        raise ValueError("synthetic batch contains non-finite values")
    _require_populated_stats(teacher)

    logits, bn_inputs = _capture_batchnorm_inputs(teacher, batch)
    probs = softmax(logits)

    hard_targets = np.zeros_like(probs)
    hard_targets[np.arange(len(probs)), np.argmax(logits, axis=1)] = 1.0
    ce_value, ce_grad_logits = cross_entropy_from_logits(logits, hard_targets)

    ie_value, ie_grad_probs = mean_prediction_negentropy(probs)
    ie_grad_logits = softmax_backward(probs, ie_grad_probs)

    norm_value, norm_taps = _norm_terms_from_inputs(bn_inputs, batch.shape[0])

    total = (
        weights.ce * ce_value + weights.alpha * ie_value + weights.beta * norm_value
    )
    terms = GeneratorLossTerms(
        ce=ce_value, ie=ie_value, norm=norm_value, total=float(total)
    )

    grad_logits = weights.ce * ce_grad_logits + weights.alpha * ie_grad_logits
    taps = {idx: weights.beta * g for idx, g in norm_taps.items()}
    grad_batch = teacher.backward(grad_logits.astype(logits.dtype), taps)
    return terms, grad_batch


def train_generator(
    teacher: Network,
    generator: Network,
    weights: GeneratorLossWeights,
    steps: int,
    batch_size: int,
    noise: NoiseSpec,
    *,
    lr: float = 1e-3,
    optimizer: Adam | None = None,
    rng: np.random.Generator | None = None,
) -> list[GeneratorLossTerms]:
    """Optimize the generator against the frozen teacher.

    Returns the per-step loss breakdown. Only generator parameters change;
    the teacher is bit-identical before and after (checked cheaply via
    parameter reads only). On a non-finite loss the generator is restored to
    its state before the bad step and ``TrainingDivergedError`` is raised.
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    optimizer = optimizer if optimizer is not None else Adam(lr=lr)
    rng = rng if rng is not None else np.random.default_rng(noise.seed)
    history: list[GeneratorLossTerms] = []
    for step in range(steps):
        snapshot = generator.copy_parameters()
        z = noise.sample(batch_size, rng)
        batch = generator.forward(z, training=True)
        terms, grad_batch = generator_loss_with_input_grad(teacher, batch, weights)
        if not np.isfinite(terms.total):
            generator.restore_parameters(snapshot)
            raise TrainingDivergedError(
                f"generator loss became non-finite at step {step}; "
                "restored last good parameters",
                step=step,
            )
        generator.backward(grad_batch)
        step_network(generator, optimizer)
        history.append(terms)
    return history
