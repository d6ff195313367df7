"""Label-private release mechanisms.

Two mechanisms are provided: ``classic_rr``, the K-ary randomized response
that returns the true class with probability ``e^eps / (e^eps + K - 1)``,
and ``selective_rr``, which first restricts the outcome space to a candidate
set derived from a non-sensitive prediction and then runs randomized
response inside that set. Every sampler has a closed-form companion
(`*_distribution`) used by the privacy auditor and the tests.

All functions are pure given their RNG argument and safe to call from
multiple threads with independent generators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn.functional import check_prob_vector, one_hot


@dataclass(frozen=True)
class PrivacyBudget:
    """Positive, finite privacy parameter for a configured run.

    The mechanism functions themselves also accept ``epsilon == 0`` (the
    fully random, degenerate mechanism) so the auditor can exercise the
    boundary; a configured training run requires a strictly positive budget.
    """

    epsilon: float

    def __post_init__(self):
        eps = float(self.epsilon)
        if not np.isfinite(eps) or eps <= 0:
            raise ValueError(f"epsilon must be positive and finite, got {eps}")


@dataclass(frozen=True)
class ThresholdRule:
    """Candidate-selection threshold; defaults to ``1 / (2 * num_classes)``."""

    num_classes: int
    threshold: float | None = None

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("num_classes must be at least 2")
        if self.threshold is not None and not (0.0 <= self.threshold < 1.0):
            raise ValueError(f"threshold must be in [0, 1), got {self.threshold}")

    @property
    def value(self) -> float:
        if self.threshold is not None:
            return float(self.threshold)
        return 1.0 / (2.0 * self.num_classes)


@dataclass(frozen=True)
class CandidateSet:
    """Strictly increasing class indices, at least two of them."""

    indices: tuple[int, ...]
    num_classes: int

    def __post_init__(self):
        if len(self.indices) < 2:
            raise ValueError("candidate set must contain at least 2 indices")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ValueError("candidate indices must be strictly increasing")
        if self.indices[0] < 0 or self.indices[-1] >= self.num_classes:
            raise ValueError(
                f"candidate indices must lie in [0, {self.num_classes})"
            )

    @property
    def k(self) -> int:
        return len(self.indices)

    def __contains__(self, index: int) -> bool:
        return index in self.indices


def _check_epsilon(epsilon: float) -> float:
    epsilon = float(epsilon)
    if not np.isfinite(epsilon) or epsilon < 0:
        raise ValueError(f"epsilon must be non-negative and finite, got {epsilon}")
    return epsilon


def classic_rr_distribution(
    true_label: int, num_classes: int, epsilon: float
) -> np.ndarray:
    """Exact outcome probabilities of K-ary randomized response (float64)."""
    epsilon = _check_epsilon(epsilon)
    if num_classes < 2:
        raise ValueError("classic randomized response needs at least 2 classes")
    if not 0 <= true_label < num_classes:
        raise ValueError(f"true_label {true_label} out of range [0, {num_classes})")
    e = np.exp(epsilon)
    denom = e + num_classes - 1.0
    table = np.full(num_classes, 1.0 / denom, dtype=np.float64)
    table[true_label] = e / denom
    return table


def classic_rr(
    true_label: int, num_classes: int, epsilon: float, rng: np.random.Generator
) -> int:
    """Sample a label from K-ary randomized response."""
    table = classic_rr_distribution(true_label, num_classes, epsilon)
    return _sample_index(table, rng)


def select_candidates(y_s: np.ndarray, rule: ThresholdRule) -> CandidateSet:
    """Indices whose probability strictly exceeds the threshold.

    Falls back to the two largest entries (ties broken toward the lowest
    index) when fewer than two pass. Deterministic in (y_s, threshold).
    """
    y_s = check_prob_vector(y_s, "y_s")
    if y_s.shape[0] != rule.num_classes:
        raise ValueError(
            f"y_s has length {y_s.shape[0]}, rule expects {rule.num_classes}"
        )
    passing = np.flatnonzero(y_s > rule.value)
    if passing.size < 2:
        # Stable sort on negated values keeps the lowest index among ties.
        order = np.argsort(-y_s, kind="stable")
        passing = np.sort(order[:2])
    return CandidateSet(tuple(int(i) for i in passing), rule.num_classes)


def selective_rr_distribution(
    y_s: np.ndarray,
    y_t: np.ndarray,
    rule: ThresholdRule,
    epsilon: float,
) -> np.ndarray:
    """Exact outcome probabilities of the selective mechanism (float64).

    With candidate set I of size k and teacher class c = argmax(y_t):
    if c is in I the mechanism returns c with probability
    ``e^eps / (e^eps + k - 1)`` and each other member of I with probability
    ``1 / (e^eps + k - 1)``; if c is outside I every member of I is returned
    with probability ``1 / k``. The support is always exactly I.
    """
    epsilon = _check_epsilon(epsilon)
    candidates = select_candidates(y_s, rule)
    y_t = check_prob_vector(y_t, "y_t")
    if y_t.shape[0] != rule.num_classes:
        raise ValueError(
            f"y_t has length {y_t.shape[0]}, rule expects {rule.num_classes}"
        )
    teacher_class = int(np.argmax(y_t))
    table = np.zeros(rule.num_classes, dtype=np.float64)
    members = list(candidates.indices)
    if teacher_class in candidates:
        denom = np.exp(epsilon) + candidates.k - 1.0
        for j in members:
            table[j] = 1.0 / denom
        table[teacher_class] = np.exp(epsilon) / denom
    else:
        for j in members:
            table[j] = 1.0 / candidates.k
    return table


def selective_rr(
    y_s: np.ndarray,
    y_t: np.ndarray,
    rule: ThresholdRule,
    epsilon: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Sample one private label; returns a one-hot vector over all classes."""
    table = selective_rr_distribution(y_s, y_t, rule, epsilon)
    label = _sample_index(table, rng)
    return one_hot(label, rule.num_classes)


def _sample_index(table: np.ndarray, rng: np.random.Generator) -> int:
    # Inverse-CDF sampling restricted to the support; one uniform draw per
    # released label, and rounding in the cumulative sum can never push the
    # draw onto a zero-probability outcome.
    support = np.flatnonzero(table)
    cdf = np.cumsum(table[support])
    u = rng.random() * cdf[-1]
    return int(support[np.searchsorted(cdf, u, side="right")])


def label_stream_rng(
    run_seed: int, stage: int, sample_index: int
) -> np.random.Generator:
    """Counter-style generator for one sample's single label draw.

    Seeding from (run seed, stage, sample index) makes each draw reproducible
    in isolation and makes "one draw per datum" checkable: re-deriving the
    stream always replays the same label.
    """
    seq = np.random.SeedSequence(
        entropy=int(run_seed), spawn_key=(int(stage), int(sample_index))
    )
    return np.random.default_rng(seq)
