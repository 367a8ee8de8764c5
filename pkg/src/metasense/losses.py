"""Sensing losses: per-cell cross-entropy, combined objective, and accuracy."""

from __future__ import annotations

import numpy as np

# Predicted probabilities are clipped into [PROB_CLIP, 1 - PROB_CLIP] before
# taking logarithms so the loss stays finite at saturated outputs.
PROB_CLIP = 1e-7


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Summed Bernoulli cross-entropy over grid cells.

    ``probs`` holds per-cell occupancy probabilities, ``labels`` the 0/1
    ground truth.  With batched inputs (leading dimensions before the cell
    axis) the mean over the batch is returned, keeping the per-scenario value
    a sum over cells.
    """
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if probs.shape != labels.shape:
        raise ValueError(f"shape mismatch: probs {probs.shape}, labels {labels.shape}")
    p = np.clip(probs, PROB_CLIP, 1.0 - PROB_CLIP)
    ce = -(labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p)).sum(axis=-1)
    return float(ce.mean())


def cross_entropy_grad(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Gradient of :func:`cross_entropy` with respect to ``probs``.

    Zero outside the clip interval, ``(p - label) / (p * (1 - p))`` inside,
    scaled by the batch mean exactly as the loss is.
    """
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=float)
    inside = (probs > PROB_CLIP) & (probs < 1.0 - PROB_CLIP)
    p = np.clip(probs, PROB_CLIP, 1.0 - PROB_CLIP)
    grad = np.where(inside, (p - labels) / (p * (1.0 - p)), 0.0)
    batch = int(np.prod(probs.shape[:-1])) if probs.ndim > 1 else 1
    return grad / batch


def combined_loss(ce: float, sinr_linear: float, beta: float) -> float:
    """Joint objective ``ce - beta * log2(1 + sinr)``.

    The SINR term rewards jamming resilience; with ``beta = 0`` the value
    reduces to the cross-entropy alone.
    """
    if sinr_linear < 0:
        raise ValueError(f"linear SINR must be >= 0, got {sinr_linear}")
    return float(ce - beta * np.log2(1.0 + sinr_linear))


def accuracy(probs: np.ndarray, labels: np.ndarray, threshold: float = 0.5) -> float:
    """Fraction of cells whose thresholded prediction matches the label."""
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels)
    if probs.shape != labels.shape:
        raise ValueError(f"shape mismatch: probs {probs.shape}, labels {labels.shape}")
    predicted = probs >= threshold
    return float(np.mean(predicted == labels.astype(bool)))
