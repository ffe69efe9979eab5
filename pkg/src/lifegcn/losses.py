"""Loss terms for the lifelong multi-label model.

Three terms: binary cross-entropy on the current task's classes against
hard labels, cross-entropy against the frozen expert's soft labels on all
previously seen classes, and a squared-distance penalty tying the old-class
rows of the current graph output to the expert's stored rows. Losses are
summed over classes and averaged over the minibatch; probabilities are
clipped to [CLIP_EPS, 1 - CLIP_EPS] before any log.

Every function returns the scalar together with its analytic gradient; the
gradients are validated against central finite differences in the tests.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError, ShapeError

CLIP_EPS = 1e-7

DEFAULT_LAMBDA1 = 0.07
DEFAULT_LAMBDA2 = 0.93
DEFAULT_LAMBDA3 = 1e5


@dataclass
class LossWeights:
    """Non-negative weights for the combined objective."""

    lambda1: float = DEFAULT_LAMBDA1
    lambda2: float = DEFAULT_LAMBDA2
    lambda3: float = DEFAULT_LAMBDA3

    def __post_init__(self):
        if min(self.lambda1, self.lambda2, self.lambda3) < 0:
            raise DomainError("loss weights must be non-negative")


def _as_batch(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        return np.ascontiguousarray(a.reshape(1, -1)), True
    if a.ndim == 2:
        return np.ascontiguousarray(a), False
    raise ShapeError(f"{name} must be 1-D or 2-D, got ndim={a.ndim}")


def _bce(target, prob, target_name):
    target2d, squeezed_t = _as_batch(target, target_name)
    prob2d, squeezed_p = _as_batch(prob, "predictions")
    if target2d.shape != prob2d.shape:
        raise ShapeError(f"{target_name} shape {target2d.shape} does not match "
                         f"predictions shape {prob2d.shape}")
    if np.any(prob2d < 0.0) or np.any(prob2d > 1.0):
        raise DomainError("predictions outside [0, 1]")
    scale = 1.0 / prob2d.shape[0]
    loss, grad = kernels.bce_loss_grad(target2d, prob2d, CLIP_EPS, scale)
    if squeezed_p and squeezed_t:
        grad = grad.reshape(-1)
    return loss, grad


def cls_loss(y, y_hat_new):
    """Hard-label cross-entropy over the current task's classes."""
    y_arr = np.asarray(y, dtype=np.float64)
    if not np.all((y_arr == 0.0) | (y_arr == 1.0)):
        raise DomainError("hard labels must be 0 or 1")
    return _bce(y_arr, y_hat_new, "hard labels")


def dst_loss(z_soft, y_hat_old):
    """Soft-target cross-entropy against the expert's old-class predictions."""
    z_arr = np.asarray(z_soft, dtype=np.float64)
    if np.any(z_arr < 0.0) or np.any(z_arr > 1.0):
        raise DomainError("soft labels outside [0, 1]")
    return _bce(z_arr, y_hat_old, "soft labels")


def gph_loss(prev_node_repr, node_repr):
    """Squared distance between stored and current old-class node rows.

    Rows of `node_repr` beyond the stored row count are unconstrained and
    receive zero gradient.
    """
    prev = np.ascontiguousarray(prev_node_repr, dtype=np.float64)
    cur = np.ascontiguousarray(node_repr, dtype=np.float64)
    if prev.ndim != 2 or cur.ndim != 2:
        raise ShapeError("node representations must be 2-D")
    if prev.shape[1] != cur.shape[1]:
        raise ShapeError(f"representation widths differ: {prev.shape[1]} "
                         f"vs {cur.shape[1]}")
    if prev.shape[0] > cur.shape[0]:
        raise ShapeError("stored representation has more rows than the current one")
    loss, grad_rows = kernels.squared_row_gap(prev, cur)
    grad = np.zeros_like(cur)
    grad[: prev.shape[0]] = grad_rows
    return loss, grad


@dataclass
class LossParts:
    """Combined loss with per-term values and weighted gradients."""

    total: float
    cls_value: float
    dst_value: float
    gph_value: float
    grad_yhat: np.ndarray
    grad_node: np.ndarray | None


def total_loss(weights, y, y_hat, z_soft, prev_node_repr, node_repr, task_index):
    """Weighted objective: first task is plain classification, later tasks
    add distillation and relationship preservation."""
    if task_index < 1:
        raise DomainError("task_index is 1-based")
    if task_index == 1:
        value, grad = cls_loss(y, y_hat)
        return LossParts(value, value, 0.0, 0.0, grad, None)

    y_hat2d, squeezed = _as_batch(y_hat, "predictions")
    boundary = np.asarray(prev_node_repr).shape[0]
    old = y_hat2d[:, :boundary]
    new = y_hat2d[:, boundary:]
    cls_value, cls_grad = cls_loss(y, new)
    dst_value, dst_grad = dst_loss(z_soft, old)
    gph_value, gph_grad = gph_loss(prev_node_repr, node_repr)

    grad_yhat = np.empty_like(y_hat2d)
    grad_yhat[:, :boundary] = weights.lambda2 * dst_grad
    grad_yhat[:, boundary:] = weights.lambda1 * cls_grad
    if squeezed:
        grad_yhat = grad_yhat.reshape(-1)
    total = (weights.lambda1 * cls_value + weights.lambda2 * dst_value
             + weights.lambda3 * gph_value)
    return LossParts(total, cls_value, dst_value, gph_value,
                     grad_yhat, weights.lambda3 * gph_grad)
