"""Scalar losses returning (value, gradient) pairs."""

import numpy as np

__all__ = ["LossError", "softmax_xent", "rmse_loss", "RMSE_EPS"]

RMSE_EPS = 1e-12  # keeps the RMSE gradient finite at zero error


class LossError(ValueError):
    """Loss contract violation (bad shapes or labels)."""


def softmax_xent(logits: np.ndarray, onehot: np.ndarray):
    """Mean cross-entropy of softmax(logits) against one-hot rows.

    Returns (loss, dloss/dlogits) with gradient (softmax - onehot) / N.
    """
    logits = np.asarray(logits)
    onehot = np.asarray(onehot)
    if logits.ndim != 2 or logits.shape != onehot.shape:
        raise LossError(f"logits {logits.shape} and onehot {onehot.shape} must match as (N, K)")
    n, k = logits.shape
    if k < 2:
        raise LossError(f"need at least 2 classes, got K={k}")
    row_sums = onehot.sum(axis=1)
    if not (np.allclose(row_sums, 1.0) and np.allclose(onehot.max(axis=1), 1.0)):
        raise LossError("onehot rows must each contain a single unit entry")

    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = float(-(onehot * logp).sum() / n)
    grad = (np.exp(logp) - onehot) / n
    return loss, grad.astype(logits.dtype, copy=False)


def rmse_loss(pred: np.ndarray, target: np.ndarray):
    """Root-mean-square error with a small stabilizer under the root.

    Returns (loss, dloss/dpred); the gradient is diff / (N * loss), which is
    self-normalizing in scale.
    """
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape or pred.ndim != 1 or pred.size < 1:
        raise LossError(f"pred {pred.shape} and target {target.shape} must be equal 1-D vectors")
    diff = pred - target
    loss = float(np.sqrt((diff * diff).mean() + RMSE_EPS))
    if not np.isfinite(loss):
        return loss, np.full_like(diff, np.nan)
    grad = diff / (diff.size * loss)
    return loss, grad.astype(pred.dtype, copy=False)
