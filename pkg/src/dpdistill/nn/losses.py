"""Batched training losses returning (value, gradient w.r.t. logits).

Gradients go through the same clamping as the scalar metrics in
``functional``: entries at the clamp floor contribute zero gradient. The
finite-difference suite checks every formula here.
"""

from __future__ import annotations

import numpy as np

from .functional import LOG_CLAMP, softmax


def softmax_backward(probs: np.ndarray, grad_probs: np.ndarray) -> np.ndarray:
    """Pull a gradient w.r.t. softmax outputs back to the logits (row-wise)."""
    dot = (grad_probs * probs).sum(axis=-1, keepdims=True)
    return probs * (grad_probs - dot)


def cross_entropy_from_logits(
    logits: np.ndarray, target_onehot: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of softmax(logits) against one-hot targets.

    Returns the batch-mean loss and its gradient w.r.t. the logits.
    """
    probs = softmax(logits)
    clamped = np.clip(probs, LOG_CLAMP, 1.0)
    per_sample = -(target_onehot * np.log(clamped)).sum(axis=-1)
    loss = float(per_sample.mean())
    active = probs > LOG_CLAMP
    grad_probs = np.where(active, -target_onehot / clamped, 0.0)
    grad_logits = softmax_backward(probs, grad_probs) / logits.shape[0]
    return loss, grad_logits.astype(logits.dtype)


def kl_from_logits(
    logits: np.ndarray, target_probs: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean KL(target || softmax(logits)) with clamp-and-renormalize semantics.

    Matches the scalar ``kl_divergence`` metric per row, averaged over the
    batch; the gradient accounts for the renormalization of the clamped
    prediction.
    """
    probs = softmax(logits)
    t = np.clip(target_probs, LOG_CLAMP, 1.0)
    t = t / t.sum(axis=-1, keepdims=True)
    c = np.clip(probs, LOG_CLAMP, 1.0)
    s = c.sum(axis=-1, keepdims=True)
    per_sample = (t * (np.log(t) - np.log(c / s))).sum(axis=-1)
    loss = float(per_sample.mean())
    active = probs > LOG_CLAMP
    grad_probs = np.where(active, -t / c + 1.0 / s, 0.0)
    grad_logits = softmax_backward(probs, grad_probs) / logits.shape[0]
    return loss, grad_logits.astype(logits.dtype)


def mean_prediction_negentropy(
    probs: np.ndarray,
) -> tuple[float, np.ndarray]:
    """sum(p_bar * log p_bar) for the batch-mean prediction p_bar.

    This is the negative entropy of the averaged prediction: its minimum,
    -log(K), is reached when the batch is perfectly class-balanced. Returns
    the value and its gradient w.r.t. the per-sample probabilities.
    """
    n = probs.shape[0]
    p_bar = probs.mean(axis=0)
    clamped = np.clip(p_bar, LOG_CLAMP, 1.0)
    value = float((p_bar * np.log(clamped)).sum())
    grad_pbar = np.log(clamped) + np.where(p_bar > LOG_CLAMP, 1.0, 0.0)
    grad_probs = np.broadcast_to(grad_pbar / n, probs.shape)
    return value, grad_probs.astype(probs.dtype)
