"""Frozen teacher snapshots taken at task boundaries.

After each task the live backbone and graph head are deep-copied together
with the correlation matrix and node embeddings in force at that moment.
During the next task the snapshot answers two queries: per-example soft
labels over the previously seen classes (standing in for the missing
ground truth), and the stored node representations that the relationship-
preserving loss pins the live graph against. All snapshot inputs are
frozen, so the node representations are computed once and cached.
"""

import numpy as np

from . import kernels
from .errors import ShapeError


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


class ExpertSnapshot:
    """Immutable copy of the model state at the end of one task."""

    def __init__(self, backbone, graph, corr, node_matrix, task_index,
                 normalize_adjacency=True, node_repr=None):
        self.backbone = backbone.copy()
        self.graph = graph.copy()
        self.corr = corr.copy()
        self.node_matrix = np.array(node_matrix, dtype=np.float64)
        if self.node_matrix.shape[0] != self.corr.size:
            raise ShapeError("node embedding rows must match the "
                             "correlation matrix size")
        self.task_index = int(task_index)
        self.normalize_adjacency = bool(normalize_adjacency)
        self.adjacency = self.corr.graph_view(self.normalize_adjacency)
        if node_repr is None:
            node_repr = self.graph.forward(self.adjacency, self.node_matrix)
        self.node_repr = np.array(node_repr, dtype=np.float64)
        _freeze(self.node_matrix, self.adjacency, self.node_repr,
                self.corr.matrix, *self.backbone.params().values(),
                *self.graph.params().values())

    @property
    def class_count(self):
        return self.corr.size

    def stored_graph(self):
        """Cached node representations over the classes seen so far."""
        return self.node_repr

    def soft_labels(self, features):
        """Sigmoid scores over the snapshot's classes for raw inputs.

        Accepts one feature vector or a batch; the output keeps the
        input's rank.
        """
        feats = np.asarray(features, dtype=np.float64)
        squeeze = feats.ndim == 1
        extracted = self.backbone.extract(feats)
        if squeeze:
            extracted = extracted[np.newaxis, :]
        logits = extracted @ self.node_repr.T
        probs = kernels.sigmoid(np.ascontiguousarray(logits))
        return probs[0] if squeeze else probs

    def to_arrays(self):
        out = {"task_index": np.array([self.task_index], dtype=np.float64),
               "normalize_adjacency": np.array(
                   [1.0 if self.normalize_adjacency else 0.0]),
               "corr_matrix": self.corr.matrix,
               "corr_boundary": np.array([self.corr.boundary],
                                         dtype=np.float64),
               "corr_class_ids": np.array(self.corr.class_ids,
                                          dtype=np.float64),
               "node_matrix": self.node_matrix,
               "node_repr": self.node_repr}
        for key, val in self.backbone.to_arrays().items():
            out[f"backbone_{key}"] = val
        for key, val in self.graph.to_arrays().items():
            out[f"graph_{key}"] = val
        return out

    @classmethod
    def from_arrays(cls, arrays):
        from .backbone import Backbone
        from .correlation import CorrelationMatrix
        from .graph import GraphHead
        backbone = Backbone.from_arrays(
            {k[len("backbone_"):]: v for k, v in arrays.items()
             if k.startswith("backbone_")})
        graph = GraphHead.from_arrays(
            {k[len("graph_"):]: v for k, v in arrays.items()
             if k.startswith("graph_")})
        corr = CorrelationMatrix(
            arrays["corr_matrix"],
            int(arrays["corr_boundary"][0]),
            [int(c) for c in arrays["corr_class_ids"]])
        return cls(backbone, graph, corr, arrays["node_matrix"],
                   int(arrays["task_index"][0]),
                   arrays["normalize_adjacency"][0] != 0.0,
                   node_repr=arrays["node_repr"])


def snapshot(backbone, graph, corr, node_matrix, task_index,
             normalize_adjacency=True):
    """Deep-copy the live model into a frozen expert."""
    return ExpertSnapshot(backbone, graph, corr, node_matrix, task_index,
                          normalize_adjacency)
