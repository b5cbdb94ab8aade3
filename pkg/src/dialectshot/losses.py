"""Training and adaptation losses, each returning its value and exact gradient.

The information-maximization pair works on probability rows: ``entropy_loss``
pushes each row toward a one-hot prediction, ``diversity_loss`` pushes the
batch marginal toward uniform.  Both keep a small epsilon inside the logarithm
so one-hot rows stay finite; gradients differentiate the implemented
expression, epsilon included.
"""

import numpy as np

from .numerics import NumericsError, require_finite, softmax, softmax_backward

# Guard inside the cross-entropy log only; far below any asserted tolerance.
_CE_EPS = 1e-12


def _check_probs(probs, what):
    probs = np.asarray(probs)
    if probs.ndim != 2:
        raise NumericsError(f"{what} expects a (batch, K) array, got shape {probs.shape}")
    require_finite(probs, what)
    row_sums = probs.sum(axis=1)
    if np.any(np.abs(row_sums - 1.0) > 1e-4) or np.any(probs < -1e-7):
        bad = int(np.argmax(np.abs(row_sums - 1.0)))
        raise NumericsError(
            f"{what} requires normalized probability rows; row {bad} sums to "
            f"{row_sums[bad]:.6f}"
        )
    return probs


def smoothed_cross_entropy(logits, labels, alpha):
    """Label-smoothed cross entropy from logits; returns (loss, dloss/dlogits).

    Targets are (1 - alpha) * onehot + alpha / K, loss is the batch mean of
    -sum_k q_k log(p_k).
    """
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    if not 0.0 <= alpha < 1.0:
        raise NumericsError(f"label smoothing {alpha} outside [0, 1)")
    batch, k = logits.shape
    if labels.shape != (batch,):
        raise NumericsError("labels must be one class index per example")
    if np.any(labels < 0) or np.any(labels >= k):
        bad = int(np.argmax((labels < 0) | (labels >= k)))
        raise NumericsError(f"example {bad} has label {int(labels[bad])} outside [0, {k})")
    probs = softmax(logits)
    q = np.full_like(probs, alpha / k)
    q[np.arange(batch), labels] += 1.0 - alpha
    loss = float(-(q * np.log(probs + _CE_EPS)).sum() / batch)
    dprobs = -(q / (probs + _CE_EPS)) / batch
    return loss, softmax_backward(dprobs, probs)


def entropy_loss(probs, eps=1e-5):
    """Mean per-row entropy -sum_k p log(p + eps); returns (value, dvalue/dprobs)."""
    probs = _check_probs(probs, "entropy_loss")
    batch = probs.shape[0]
    value = float(-(probs * np.log(probs + eps)).sum() / batch)
    dprobs = -(np.log(probs + eps) + probs / (probs + eps)) / batch
    return value, dprobs


def diversity_loss(probs, eps=1e-5):
    """Negentropy of the batch marginal sum_k pbar log(pbar + eps).

    Minimized, at -log K, when the column means are uniform.  Returns
    (value, dvalue/dprobs).
    """
    probs = _check_probs(probs, "diversity_loss")
    batch = probs.shape[0]
    marginal = probs.mean(axis=0)
    value = float((marginal * np.log(marginal + eps)).sum())
    dmarginal = np.log(marginal + eps) + marginal / (marginal + eps)
    dprobs = np.broadcast_to(dmarginal / batch, probs.shape).copy()
    return value, dprobs
