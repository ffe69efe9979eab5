"""Trainable feature extractor: a small two-layer MLP.

Maps raw example features (length `in_dim`) to the representation width the
graph head produces, so predictions come from the inner product of the two.
The single hidden activation matches the graph head's LeakyReLU.
"""

import numpy as np

from . import kernels
from .errors import ShapeError
from .graph import DEFAULT_LEAKY_SLOPE, DEFAULT_OUT_DIM
from .numerics import check_finite, matmul

DEFAULT_IN_DIM = 32
DEFAULT_HIDDEN = 64


class BackboneCache:
    __slots__ = ("inputs", "pre1", "hidden")

    def __init__(self, inputs, pre1, hidden):
        self.inputs = inputs
        self.pre1 = pre1
        self.hidden = hidden


class Backbone:
    """Affine -> LeakyReLU -> affine feature extractor."""

    def __init__(self, w1, b1, w2, b2, slope=DEFAULT_LEAKY_SLOPE):
        self.w1 = np.ascontiguousarray(w1, dtype=np.float64)
        self.b1 = np.ascontiguousarray(b1, dtype=np.float64)
        self.w2 = np.ascontiguousarray(w2, dtype=np.float64)
        self.b2 = np.ascontiguousarray(b2, dtype=np.float64)
        if self.w1.shape[1] != self.b1.shape[0] or self.w2.shape[1] != self.b2.shape[0]:
            raise ShapeError("bias lengths do not match layer widths")
        if self.w1.shape[1] != self.w2.shape[0]:
            raise ShapeError(f"layer widths do not chain: {self.w1.shape} "
                             f"then {self.w2.shape}")
        self.slope = float(slope)

    @classmethod
    def init(cls, in_dim=DEFAULT_IN_DIM, hidden=DEFAULT_HIDDEN,
             out_dim=DEFAULT_OUT_DIM, seed=0, slope=DEFAULT_LEAKY_SLOPE):
        rng = np.random.default_rng([seed, 0x636E6E])
        w1 = rng.standard_normal((in_dim, hidden)) / np.sqrt(in_dim)
        w2 = rng.standard_normal((hidden, out_dim)) / np.sqrt(hidden)
        return cls(w1, np.zeros(hidden), w2, np.zeros(out_dim), slope)

    @property
    def in_dim(self):
        return self.w1.shape[0]

    @property
    def out_dim(self):
        return self.w2.shape[1]

    def _as_batch(self, x):
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(1, -1)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeError(f"expected features of length {self.in_dim}, "
                             f"got shape {x.shape}")
        return x

    def extract_cached(self, x):
        batch = self._as_batch(x)
        pre1 = matmul(batch, self.w1) + self.b1
        hidden = kernels.leaky_relu(pre1, self.slope)
        out = matmul(hidden, self.w2) + self.b2
        return out, BackboneCache(batch, pre1, hidden)

    def extract(self, x):
        """Feature vector(s) for one example (1-D) or a batch (2-D)."""
        single = np.asarray(x).ndim == 1
        out, _ = self.extract_cached(x)
        return out[0] if single else out

    def backward(self, cache, grad_out):
        grad_out = np.ascontiguousarray(grad_out, dtype=np.float64)
        if grad_out.shape != (cache.inputs.shape[0], self.out_dim):
            raise ShapeError("upstream gradient shape does not match output")
        d_w2 = matmul(cache.hidden.T, grad_out)
        d_b2 = grad_out.sum(axis=0)
        d_hidden = matmul(grad_out, self.w2.T)
        d_pre1 = kernels.leaky_relu_grad(cache.pre1, d_hidden, self.slope)
        d_w1 = matmul(cache.inputs.T, d_pre1)
        d_b1 = d_pre1.sum(axis=0)
        return {"w1": check_finite(d_w1, "backbone w1 gradient"), "b1": d_b1,
                "w2": check_finite(d_w2, "backbone w2 gradient"), "b2": d_b2}

    def copy(self):
        return Backbone(self.w1.copy(), self.b1.copy(),
                        self.w2.copy(), self.b2.copy(), self.slope)

    def params(self):
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def to_arrays(self):
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2,
                "slope": np.array([self.slope])}

    @classmethod
    def from_arrays(cls, arrays):
        return cls(arrays["w1"], arrays["b1"], arrays["w2"], arrays["b2"],
                   float(arrays["slope"][0]))
