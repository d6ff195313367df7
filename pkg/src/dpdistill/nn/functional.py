"""Probability-space primitives shared by losses, mechanisms and metrics.

All log computations clamp their argument to ``[LOG_CLAMP, 1]`` so that
degenerate (one-hot) probability vectors stay finite.
"""

from __future__ import annotations

import numpy as np

# Floor applied to probabilities before any log.
LOG_CLAMP = 1e-7

# Tolerance for "entries sum to one" checks on probability vectors.
PROB_SUM_TOL = 1e-5


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stabilized by max subtraction.

    Accepts a single logit vector or a ``[batch, classes]`` array and
    preserves the input dtype.
    """
    logits = np.asarray(logits)
    if not np.all(np.isfinite(logits)):
        raise ValueError("softmax requires finite logits")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def one_hot(indices, num_classes: int, dtype=np.float32) -> np.ndarray:
    """One-hot encode an index or an array of indices."""
    indices = np.asarray(indices)
    if np.any(indices < 0) or np.any(indices >= num_classes):
        raise ValueError(f"class index out of range [0, {num_classes})")
    out = np.zeros(indices.shape + (num_classes,), dtype=dtype)
    np.put_along_axis(out, indices[..., None].astype(np.int64), 1, axis=-1)
    return out


def check_prob_vector(p: np.ndarray, name: str = "probability vector") -> np.ndarray:
    """Validate entries in [0, 1] and sum within PROB_SUM_TOL of 1."""
    p = np.asarray(p)
    if p.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError(f"{name} contains non-finite entries")
    if np.any(p < 0) or np.any(p > 1 + PROB_SUM_TOL):
        raise ValueError(f"{name} has entries outside [0, 1]")
    if abs(float(p.sum()) - 1.0) > PROB_SUM_TOL:
        raise ValueError(f"{name} sums to {float(p.sum())}, expected 1")
    return p


def is_one_hot(v: np.ndarray, tol: float = 1e-6) -> bool:
    v = np.asarray(v)
    if v.ndim != 1:
        return False
    near_one = np.abs(v - 1.0) <= tol
    near_zero = np.abs(v) <= tol
    return bool(near_one.sum() == 1 and np.all(near_one | near_zero))


def cross_entropy(pred: np.ndarray, target_onehot: np.ndarray) -> float:
    """-sum(target * log(pred)) with pred clamped to [LOG_CLAMP, 1].

    ``target_onehot`` must be a one-hot vector.
    """
    pred = check_prob_vector(pred, "pred")
    target_onehot = np.asarray(target_onehot)
    if target_onehot.shape != pred.shape:
        raise ValueError(
            f"shape mismatch: pred {pred.shape} vs target {target_onehot.shape}"
        )
    if not is_one_hot(target_onehot):
        raise ValueError("target is not one-hot")
    clamped = np.clip(pred, LOG_CLAMP, 1.0)
    return float(-(target_onehot * np.log(clamped)).sum())


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """KL(p || q) with both inputs clamped to [LOG_CLAMP, 1] and renormalized."""
    p = check_prob_vector(p, "p")
    q = np.asarray(q)
    if q.shape != p.shape:
        raise ValueError(f"length mismatch: p has {p.shape[0]}, q has {q.shape[0]}")
    q = check_prob_vector(q, "q")
    pc = np.clip(p, LOG_CLAMP, 1.0)
    qc = np.clip(q, LOG_CLAMP, 1.0)
    pc = pc / pc.sum()
    qc = qc / qc.sum()
    return float((pc * (np.log(pc) - np.log(qc))).sum())


def entropy(p: np.ndarray) -> float:
    """Shannon entropy -sum(p log p), clamped like the other metrics."""
    p = check_prob_vector(p, "p")
    pc = np.clip(p, LOG_CLAMP, 1.0)
    return float(-(p * np.log(pc)).sum())
