"""Dense float64 matrix helpers, the Adam optimizer, and a gradient checker.

Matrices are plain C-contiguous numpy float64 arrays. Everything here is
desk-scale: correctness and checkability over throughput, except the Adam
inner update which runs on the kernel backend.
"""

import numpy as np

from . import kernels
from .errors import NumericError, ShapeError

DEFAULT_LEARNING_RATE = 1e-4
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_EPS = 1e-4


def as_matrix(data):
    """Coerce to a C-contiguous float64 2-D array."""
    a = np.ascontiguousarray(data, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={a.ndim}")
    return a


def check_finite(a, context="matrix"):
    if not np.all(np.isfinite(a)):
        raise NumericError(f"non-finite values in {context}")
    return a


def matmul(a, b):
    """Matrix product with explicit conformance checking."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes do not conform: {a.shape} x {b.shape}")
    return check_finite(a @ b, "matmul result")


class AdamState:
    """Per-parameter Adam moment buffers plus hyperparameters.

    The step counter increments by one per `adam_step`; both moment buffers
    always keep the parameter's exact shape.
    """

    def __init__(self, shape, lr=DEFAULT_LEARNING_RATE, beta1=DEFAULT_BETA1,
                 beta2=DEFAULT_BETA2, eps=DEFAULT_EPS):
        self.m = np.zeros(shape, dtype=np.float64)
        self.v = np.zeros(shape, dtype=np.float64)
        self.step = 0
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)

    @classmethod
    def for_param(cls, param, **hyper):
        return cls(np.asarray(param).shape, **hyper)


def adam_step(param, grad, state):
    """Bias-corrected Adam update, applied to `param` in place."""
    param = np.asarray(param)
    grad = np.asarray(grad, dtype=np.float64)
    if param.shape != grad.shape:
        raise ShapeError(f"param/grad shapes differ: {param.shape} vs {grad.shape}")
    if state.m.shape != param.shape:
        raise ShapeError(f"optimizer state shape {state.m.shape} does not match "
                         f"param shape {param.shape}")
    state.step += 1
    kernels.adam_update(param, np.ascontiguousarray(grad), state.m, state.v,
                        state.step, state.lr, state.beta1, state.beta2, state.eps)
    return check_finite(param, "adam_step result")


def finite_diff_check(f, params, analytic_grad, h=1e-5):
    """Max relative error between central differences of `f` and `analytic_grad`.

    `params` is a single float64 array (any shape); `f` maps such an array to
    a scalar. The error per coordinate is |cd - g| / max(1, |g|). `params` is
    never mutated.
    """
    params = np.asarray(params, dtype=np.float64)
    analytic_grad = np.asarray(analytic_grad, dtype=np.float64)
    if params.shape != analytic_grad.shape:
        raise ShapeError("params and analytic_grad shapes differ")
    if h <= 0:
        raise ValueError("h must be positive")
    work = params.copy()
    flat = work.reshape(-1)
    flat_grad = analytic_grad.reshape(-1)
    worst = 0.0
    for i in range(flat.shape[0]):
        orig = flat[i]
        flat[i] = orig + h
        upper = f(work)
        flat[i] = orig - h
        lower = f(work)
        flat[i] = orig
        if not (np.isfinite(upper) and np.isfinite(lower)):
            raise NumericError("non-finite objective during finite differences")
        cd = (upper - lower) / (2.0 * h)
        err = abs(cd - flat_grad[i]) / max(1.0, abs(flat_grad[i]))
        if err > worst:
            worst = err
    return worst
