"""Hot numeric kernels with two interchangeable backends.

Every kernel exists twice: a vectorized pure-numpy implementation and a
loop-style implementation compiled with numba's @njit. The compiled path is
the default; set LIFEGCN_PURE_NUMPY=1 (or install without numba) to run on
the numpy fallback. Both backends are exposed via `get_impls` so tests can
assert agreement and `benchmarks/bench_kernels.py` can time them against
each other.

All kernels take C-contiguous float64 (or int64 count) arrays. They are the
innermost loops of the trainer: activation functions, the fused
cross-entropy loss/gradient, Adam updates, streaming label statistics, and
row normalization of the correlation matrix.
"""

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None
    HAS_NUMBA = False

_FLAG = os.environ.get("LIFEGCN_PURE_NUMPY", "").strip().lower()
PURE_NUMPY_REQUESTED = _FLAG in ("1", "true", "yes", "on")


# ---------------------------------------------------------------------------
# numpy backend (vectorized)
# ---------------------------------------------------------------------------

def _leaky_relu_np(x, slope):
    return np.where(x > 0.0, x, slope * x)


def _leaky_relu_grad_np(pre, grad, slope):
    return np.where(pre > 0.0, grad, slope * grad)


def _sigmoid_np(x):
    # tanh form is overflow-free for any finite input
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _bce_loss_grad_np(target, prob, eps, scale):
    p = np.clip(prob, eps, 1.0 - eps)
    loss = -scale * float(np.sum(target * np.log(p) + (1.0 - target) * np.log1p(-p)))
    interior = (prob > eps) & (prob < 1.0 - eps)
    grad = np.where(interior, scale * (-target / p + (1.0 - target) / (1.0 - p)), 0.0)
    return loss, grad


def _adam_update_np(param, grad, m, v, step, lr, beta1, beta2, eps):
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * (grad * grad)
    bc1 = 1.0 - beta1 ** step
    bc2 = 1.0 - beta2 ** step
    param -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def _count_label_pairs_np(pair_counts, class_counts, labels):
    y = labels != 0.0
    class_counts += y.sum(axis=0).astype(np.int64)
    pair_counts += (y.astype(np.float64).T @ y.astype(np.float64)).astype(np.int64)


def _accumulate_soft_stats_np(soft_sum, soft_pair, soft, labels):
    soft_sum += soft.sum(axis=0)
    soft_pair += soft.T @ (labels != 0.0).astype(np.float64)


def _row_normalize_np(a):
    s = a.sum(axis=1, keepdims=True)
    return np.divide(a, s, out=a.copy(), where=s > 0.0)


def _squared_row_gap_np(ref, cur):
    diff = cur[: ref.shape[0]] - ref
    return float(np.sum(diff * diff)), 2.0 * diff


# ---------------------------------------------------------------------------
# numba backend (explicit loops, compiled)
# ---------------------------------------------------------------------------

def _leaky_relu_nb(x, slope):
    out = np.empty_like(x)
    flat_x = x.reshape(-1)
    flat_out = out.reshape(-1)
    for i in range(flat_x.shape[0]):
        value = flat_x[i]
        flat_out[i] = value if value > 0.0 else slope * value
    return out


def _leaky_relu_grad_nb(pre, grad, slope):
    out = np.empty_like(grad)
    flat_pre = pre.reshape(-1)
    flat_grad = grad.reshape(-1)
    flat_out = out.reshape(-1)
    for i in range(flat_pre.shape[0]):
        g = flat_grad[i]
        flat_out[i] = g if flat_pre[i] > 0.0 else slope * g
    return out


def _sigmoid_nb(x):
    out = np.empty_like(x)
    flat_x = x.reshape(-1)
    flat_out = out.reshape(-1)
    for i in range(flat_x.shape[0]):
        flat_out[i] = 0.5 * (1.0 + np.tanh(0.5 * flat_x[i]))
    return out


def _bce_loss_grad_nb(target, prob, eps, scale):
    grad = np.zeros_like(prob)
    flat_t = target.reshape(-1)
    flat_p = prob.reshape(-1)
    flat_g = grad.reshape(-1)
    hi = 1.0 - eps
    loss = 0.0
    for i in range(flat_p.shape[0]):
        t = flat_t[i]
        p_raw = flat_p[i]
        p = min(max(p_raw, eps), hi)
        loss -= t * np.log(p) + (1.0 - t) * np.log1p(-p)
        if eps < p_raw < hi:
            flat_g[i] = scale * (-t / p + (1.0 - t) / (1.0 - p))
    return scale * loss, grad


def _adam_update_nb(param, grad, m, v, step, lr, beta1, beta2, eps):
    flat_p = param.reshape(-1)
    flat_g = grad.reshape(-1)
    flat_m = m.reshape(-1)
    flat_v = v.reshape(-1)
    bc1 = 1.0 - beta1 ** step
    bc2 = 1.0 - beta2 ** step
    for i in range(flat_p.shape[0]):
        g = flat_g[i]
        flat_m[i] = beta1 * flat_m[i] + (1.0 - beta1) * g
        flat_v[i] = beta2 * flat_v[i] + (1.0 - beta2) * (g * g)
        flat_p[i] -= lr * (flat_m[i] / bc1) / (np.sqrt(flat_v[i] / bc2) + eps)


def _count_label_pairs_nb(pair_counts, class_counts, labels):
    n, width = labels.shape
    for ex in range(n):
        for i in range(width):
            if labels[ex, i] != 0.0:
                class_counts[i] += 1
                for j in range(width):
                    if labels[ex, j] != 0.0:
                        pair_counts[i, j] += 1


def _accumulate_soft_stats_nb(soft_sum, soft_pair, soft, labels):
    n, old = soft.shape
    new = labels.shape[1]
    for ex in range(n):
        for i in range(old):
            z = soft[ex, i]
            soft_sum[i] += z
            for j in range(new):
                if labels[ex, j] != 0.0:
                    soft_pair[i, j] += z


def _row_normalize_nb(a):
    out = a.copy()
    for i in range(a.shape[0]):
        s = 0.0
        for j in range(a.shape[1]):
            s += a[i, j]
        if s > 0.0:
            for j in range(a.shape[1]):
                out[i, j] = a[i, j] / s
    return out


def _squared_row_gap_nb(ref, cur):
    rows, width = ref.shape
    grad = np.empty((rows, width))
    loss = 0.0
    for i in range(rows):
        for j in range(width):
            d = cur[i, j] - ref[i, j]
            loss += d * d
            grad[i, j] = 2.0 * d
    return loss, grad


_NUMPY_IMPLS = {
    "leaky_relu": _leaky_relu_np,
    "leaky_relu_grad": _leaky_relu_grad_np,
    "sigmoid": _sigmoid_np,
    "bce_loss_grad": _bce_loss_grad_np,
    "adam_update": _adam_update_np,
    "count_label_pairs": _count_label_pairs_np,
    "accumulate_soft_stats": _accumulate_soft_stats_np,
    "row_normalize": _row_normalize_np,
    "squared_row_gap": _squared_row_gap_np,
}

_NUMBA_SOURCES = {
    "leaky_relu": _leaky_relu_nb,
    "leaky_relu_grad": _leaky_relu_grad_nb,
    "sigmoid": _sigmoid_nb,
    "bce_loss_grad": _bce_loss_grad_nb,
    "adam_update": _adam_update_nb,
    "count_label_pairs": _count_label_pairs_nb,
    "accumulate_soft_stats": _accumulate_soft_stats_nb,
    "row_normalize": _row_normalize_nb,
    "squared_row_gap": _squared_row_gap_nb,
}

_NUMBA_IMPLS = None
if HAS_NUMBA:
    _NUMBA_IMPLS = {
        name: njit(cache=True)(func) for name, func in _NUMBA_SOURCES.items()
    }

_ACTIVE_BACKEND = "numba" if (HAS_NUMBA and not PURE_NUMPY_REQUESTED) else "numpy"
_ACTIVE = _NUMBA_IMPLS if _ACTIVE_BACKEND == "numba" else _NUMPY_IMPLS

leaky_relu = _ACTIVE["leaky_relu"]
leaky_relu_grad = _ACTIVE["leaky_relu_grad"]
sigmoid = _ACTIVE["sigmoid"]
bce_loss_grad = _ACTIVE["bce_loss_grad"]
adam_update = _ACTIVE["adam_update"]
count_label_pairs = _ACTIVE["count_label_pairs"]
accumulate_soft_stats = _ACTIVE["accumulate_soft_stats"]
row_normalize = _ACTIVE["row_normalize"]
squared_row_gap = _ACTIVE["squared_row_gap"]


def active_backend():
    """Name of the backend the module-level kernels are bound to."""
    return _ACTIVE_BACKEND


def available_backends():
    return ("numpy", "numba") if HAS_NUMBA else ("numpy",)


def get_impls(backend):
    """Return the kernel table for `backend` ("numpy" or "numba")."""
    if backend == "numpy":
        return dict(_NUMPY_IMPLS)
    if backend == "numba":
        if _NUMBA_IMPLS is None:
            raise RuntimeError("numba backend unavailable (numba not importable)")
        return dict(_NUMBA_IMPLS)
    raise ValueError(f"unknown backend {backend!r}")


def warmup():
    """Run every active kernel once on tiny inputs.

    With the numba backend this pays the JIT compile cost (cached on disk
    afterwards) so it is not billed to whatever is being timed later.
    """
    x = np.array([[0.5, -0.5]])
    t = np.array([[1.0, 0.0]])
    leaky_relu(x, 0.2)
    leaky_relu_grad(x, x, 0.2)
    sigmoid(x)
    bce_loss_grad(t, 0.5 * (t + 0.25), 1e-7, 1.0)
    adam_update(x.copy(), x.copy(), np.zeros_like(x), np.zeros_like(x),
                1, 1e-4, 0.9, 0.999, 1e-4)
    count_label_pairs(np.zeros((2, 2), dtype=np.int64),
                      np.zeros(2, dtype=np.int64), t)
    accumulate_soft_stats(np.zeros(2), np.zeros((2, 2)), 0.5 * (t + 0.25), t)
    row_normalize(np.abs(x))
    squared_row_gap(x, x + 1.0)
    return _ACTIVE_BACKEND
