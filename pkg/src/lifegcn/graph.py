"""Two-layer graph convolution over the label graph.

Node features start from deterministic seeded pseudo-embeddings (one fixed
unit-norm row per class id, so the matrix can grow across tasks without
touching existing rows) and are propagated twice through the adjacency:
H1 = h(A H0 W1), H_out = h(A H1 W2) with a LeakyReLU h. Only W1 and W2 are
trained; their shapes do not depend on the class count, so the same head
survives the label space growing.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ShapeError
from .numerics import check_finite, matmul

DEFAULT_EMBED_DIM = 16
DEFAULT_HIDDEN_DIM = 32
DEFAULT_OUT_DIM = 64
DEFAULT_LEAKY_SLOPE = 0.2


def embedding_row(seed, class_id, dim):
    """Deterministic unit-norm embedding for one class id."""
    rng = np.random.default_rng([seed, int(class_id)])
    row = rng.standard_normal(dim)
    return row / np.linalg.norm(row)


@dataclass
class NodeEmbeddings:
    """Fixed per-class node features, one unit-norm row per seen class."""

    class_ids: tuple
    dim: int
    seed: int
    matrix: np.ndarray

    @property
    def rows(self):
        return self.matrix.shape[0]


def init_embeddings(class_ids, dim, seed):
    """Build embeddings for an ordered list of unique class ids.

    Rows depend only on (seed, class id), so growing the class list leaves
    all earlier rows bit-identical.
    """
    ids = [int(c) for c in class_ids]
    if len(set(ids)) != len(ids):
        raise ValueError("class ids must be unique")
    if dim < 1:
        raise ValueError("embedding dim must be >= 1")
    matrix = np.empty((len(ids), dim), dtype=np.float64)
    for i, cid in enumerate(ids):
        matrix[i] = embedding_row(seed, cid, dim)
    return NodeEmbeddings(tuple(ids), dim, seed, matrix)


class GraphCache:
    """Forward intermediates needed by the backward pass."""

    __slots__ = ("adjacency", "agg0", "pre1", "hidden", "agg1", "pre2", "out")

    def __init__(self, adjacency, agg0, pre1, hidden, agg1, pre2, out):
        self.adjacency = adjacency
        self.agg0 = agg0
        self.pre1 = pre1
        self.hidden = hidden
        self.agg1 = agg1
        self.pre2 = pre2
        self.out = out


class GraphHead:
    """The trainable two-layer propagation weights."""

    def __init__(self, w1, w2, slope=DEFAULT_LEAKY_SLOPE):
        self.w1 = np.ascontiguousarray(w1, dtype=np.float64)
        self.w2 = np.ascontiguousarray(w2, dtype=np.float64)
        if self.w1.ndim != 2 or self.w2.ndim != 2:
            raise ShapeError("graph weights must be 2-D")
        if self.w1.shape[1] != self.w2.shape[0]:
            raise ShapeError(f"layer widths do not chain: {self.w1.shape} "
                             f"then {self.w2.shape}")
        self.slope = float(slope)

    @classmethod
    def init(cls, embed_dim=DEFAULT_EMBED_DIM, hidden_dim=DEFAULT_HIDDEN_DIM,
             out_dim=DEFAULT_OUT_DIM, seed=0, slope=DEFAULT_LEAKY_SLOPE):
        rng = np.random.default_rng([seed, 0x67636E])
        w1 = rng.standard_normal((embed_dim, hidden_dim)) / np.sqrt(embed_dim)
        w2 = rng.standard_normal((hidden_dim, out_dim)) / np.sqrt(hidden_dim)
        return cls(w1, w2, slope)

    @property
    def out_dim(self):
        return self.w2.shape[1]

    def forward_cached(self, adjacency, node_features):
        adjacency = np.ascontiguousarray(adjacency, dtype=np.float64)
        node_features = np.ascontiguousarray(node_features, dtype=np.float64)
        if adjacency.shape[0] != adjacency.shape[1]:
            raise ShapeError("adjacency must be square")
        if adjacency.shape[1] != node_features.shape[0]:
            raise ShapeError(f"adjacency {adjacency.shape} does not match "
                             f"{node_features.shape[0]} node rows")
        if node_features.shape[1] != self.w1.shape[0]:
            raise ShapeError(f"embedding dim {node_features.shape[1]} does not "
                             f"match W1 input dim {self.w1.shape[0]}")
        agg0 = matmul(adjacency, node_features)
        pre1 = matmul(agg0, self.w1)
        hidden = kernels.leaky_relu(pre1, self.slope)
        agg1 = matmul(adjacency, hidden)
        pre2 = matmul(agg1, self.w2)
        out = kernels.leaky_relu(pre2, self.slope)
        return out, GraphCache(adjacency, agg0, pre1, hidden, agg1, pre2, out)

    def forward(self, adjacency, node_features):
        """Propagate embeddings through both layers: rows are per-class
        representations of width `out_dim`."""
        out, _ = self.forward_cached(adjacency, node_features)
        return out

    def backward(self, cache, grad_out):
        """Chain-rule gradients for w1/w2; adjacency and embeddings are
        treated as constants."""
        grad_out = np.ascontiguousarray(grad_out, dtype=np.float64)
        if grad_out.shape != cache.out.shape:
            raise ShapeError("upstream gradient shape does not match output")
        d_pre2 = kernels.leaky_relu_grad(cache.pre2, grad_out, self.slope)
        d_w2 = matmul(cache.agg1.T, d_pre2)
        d_hidden = matmul(matmul(cache.adjacency.T, d_pre2), self.w2.T)
        d_pre1 = kernels.leaky_relu_grad(cache.pre1, d_hidden, self.slope)
        d_w1 = matmul(cache.agg0.T, d_pre1)
        return {"w1": check_finite(d_w1, "graph w1 gradient"),
                "w2": check_finite(d_w2, "graph w2 gradient")}

    def copy(self):
        return GraphHead(self.w1.copy(), self.w2.copy(), self.slope)

    def params(self):
        return {"w1": self.w1, "w2": self.w2}

    def to_arrays(self):
        return {"w1": self.w1, "w2": self.w2,
                "slope": np.array([self.slope])}

    @classmethod
    def from_arrays(cls, arrays):
        return cls(arrays["w1"], arrays["w2"], float(arrays["slope"][0]))
