"""Streaming label statistics and the block-structured correlation matrix.

Within a task, integer pair counts over the new classes estimate
P(new_i | new_j) = N_ij / N_j. Across tasks the old classes have no ground
truth, so the expert's per-example soft labels stand in: accumulated sums of
z_i and z_i * y_j give P(old_i | new_j), and Bayes' rule flips that into
P(new_j | old_i). The assembled matrix keeps four blocks over all seen
classes:

    [ old-old (frozen from the previous task) | old-new ]
    [ new-old                                 | new-new ]

The stored matrix holds raw conditional probabilities (diagonal pinned to 1
so each node keeps its own embedding during propagation); the graph layers
consume a row-normalized view. Accumulators reset at task boundaries; only
the assembled matrix carries forward.
"""

import csv
import json

import numpy as np

from . import kernels
from .errors import DataError, DomainError, ShapeError


class LabelStats:
    """Single-writer accumulators over one task's training stream."""

    def __init__(self, new_count, old_count=0):
        if new_count < 1 or old_count < 0:
            raise ValueError("class counts out of range")
        self.new_count = int(new_count)
        self.old_count = int(old_count)
        self.pair_counts = np.zeros((new_count, new_count), dtype=np.int64)
        self.class_counts = np.zeros(new_count, dtype=np.int64)
        self.soft_sum = np.zeros(old_count, dtype=np.float64)
        self.soft_pair = np.zeros((old_count, new_count), dtype=np.float64)


def observe_batch(stats, hard_labels, soft_labels=None):
    """Fold one minibatch into the accumulators.

    `hard_labels` is (n, new_count) binary; `soft_labels` is
    (n, old_count) in [0, 1], or None when there is no expert to query.
    """
    hard = np.ascontiguousarray(hard_labels, dtype=np.float64)
    if hard.ndim != 2 or hard.shape[1] != stats.new_count:
        raise ShapeError(f"hard labels must be (n, {stats.new_count}), "
                         f"got {hard.shape}")
    if not np.all((hard == 0.0) | (hard == 1.0)):
        raise DomainError("hard labels must be 0 or 1")
    if soft_labels is not None:
        soft = np.ascontiguousarray(soft_labels, dtype=np.float64)
        if soft.ndim != 2 or soft.shape != (hard.shape[0], stats.old_count):
            raise ShapeError(f"soft labels must be ({hard.shape[0]}, "
                             f"{stats.old_count}), got {soft.shape}")
        if np.any(soft < 0.0) or np.any(soft > 1.0):
            raise DomainError("soft labels outside [0, 1]")
    if hard.shape[0] == 0:
        return stats
    kernels.count_label_pairs(stats.pair_counts, stats.class_counts, hard)
    if soft_labels is not None and stats.old_count > 0:
        kernels.accumulate_soft_stats(stats.soft_sum, stats.soft_pair,
                                      soft, hard)
    return stats


def _safe_col_divide(numer, denom):
    out = np.zeros_like(numer, dtype=np.float64)
    np.divide(numer, denom[np.newaxis, :], out=out,
              where=denom[np.newaxis, :] > 0)
    return out


def new_new_block(stats):
    """Conditional co-occurrence among the current task's classes.

    Column j conditions on class j; unobserved classes leave a zero column
    off the diagonal, and the diagonal is pinned to 1.
    """
    block = _safe_col_divide(stats.pair_counts.astype(np.float64),
                             stats.class_counts.astype(np.float64))
    np.fill_diagonal(block, 1.0)
    return np.clip(block, 0.0, 1.0)


def old_new_block(stats):
    """Soft-label estimate of P(old_i | new_j): accumulated z_i * y_j over
    the count of examples carrying new class j."""
    return np.clip(_safe_col_divide(stats.soft_pair,
                                    stats.class_counts.astype(np.float64)),
                   0.0, 1.0)


def new_old_block(stats, old_new):
    """Bayes flip of the old-new block: P(new_j | old_i) =
    P(old_i | new_j) * N_j / sum_x z_i."""
    old_new = np.asarray(old_new, dtype=np.float64)
    if old_new.shape != (stats.old_count, stats.new_count):
        raise ShapeError(f"old-new block shape {old_new.shape} does not match "
                         f"stats ({stats.old_count}, {stats.new_count})")
    weighted = old_new * stats.class_counts[np.newaxis, :].astype(np.float64)
    out = np.zeros((stats.new_count, stats.old_count), dtype=np.float64)
    np.divide(weighted.T, stats.soft_sum[np.newaxis, :], out=out,
              where=stats.soft_sum[np.newaxis, :] > 0)
    return np.clip(out, 0.0, 1.0)


class CorrelationMatrix:
    """Square conditional-probability matrix over all seen classes."""

    def __init__(self, matrix, boundary, class_ids):
        self.matrix = np.ascontiguousarray(matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ShapeError("correlation matrix must be square")
        if not 0 <= boundary <= self.matrix.shape[0]:
            raise ShapeError("block boundary outside the matrix")
        if len(class_ids) != self.matrix.shape[0]:
            raise ShapeError("class id list does not match matrix size")
        self.boundary = int(boundary)
        self.class_ids = tuple(int(c) for c in class_ids)

    @property
    def size(self):
        return self.matrix.shape[0]

    def graph_view(self, normalize=True):
        """Adjacency handed to the graph layers; row-normalized by default."""
        if normalize:
            return kernels.row_normalize(self.matrix)
        return self.matrix.copy()

    def blocks(self):
        b = self.boundary
        out = {"new_new": self.matrix[b:, b:].copy()}
        if b > 0:
            out["old_old"] = self.matrix[:b, :b].copy()
            out["old_new"] = self.matrix[:b, b:].copy()
            out["new_old"] = self.matrix[b:, :b].copy()
        return out

    def copy(self):
        return CorrelationMatrix(self.matrix.copy(), self.boundary,
                                 self.class_ids)


def assemble(prev, new_new, old_new=None, new_old=None, new_class_ids=()):
    """Grow the correlation matrix by one task.

    With no previous matrix the result is just the new-new block. Otherwise
    the previous matrix is frozen into the top-left corner and the three
    fresh blocks fill the rest; the diagonal is forced to 1 either way.
    """
    new_new = np.asarray(new_new, dtype=np.float64)
    n_new = new_new.shape[0]
    if new_new.shape != (n_new, n_new):
        raise ShapeError("new-new block must be square")
    if len(new_class_ids) != n_new:
        raise ShapeError("new class id list does not match new-new block")
    if np.any(new_new < 0.0) or np.any(new_new > 1.0):
        raise DomainError("correlation entries outside [0, 1]")

    if prev is None:
        matrix = new_new.copy()
        np.fill_diagonal(matrix, 1.0)
        return CorrelationMatrix(matrix, 0, tuple(new_class_ids))

    n_old = prev.size
    old_new = np.asarray(old_new, dtype=np.float64)
    new_old = np.asarray(new_old, dtype=np.float64)
    if old_new.shape != (n_old, n_new):
        raise ShapeError(f"old-new block must be ({n_old}, {n_new}), "
                         f"got {old_new.shape}")
    if new_old.shape != (n_new, n_old):
        raise ShapeError(f"new-old block must be ({n_new}, {n_old}), "
                         f"got {new_old.shape}")
    for block in (old_new, new_old):
        if np.any(block < 0.0) or np.any(block > 1.0):
            raise DomainError("correlation entries outside [0, 1]")

    size = n_old + n_new
    matrix = np.empty((size, size), dtype=np.float64)
    matrix[:n_old, :n_old] = prev.matrix
    matrix[:n_old, n_old:] = old_new
    matrix[n_old:, :n_old] = new_old
    matrix[n_old:, n_old:] = new_new
    np.fill_diagonal(matrix, 1.0)
    return CorrelationMatrix(matrix, n_old,
                             prev.class_ids + tuple(new_class_ids))


def build(stats, prev=None, new_class_ids=(), include_cross_blocks=True):
    """Blocks-from-stats convenience used once per training step."""
    nn = new_new_block(stats)
    if prev is None:
        return assemble(None, nn, new_class_ids=new_class_ids)
    if include_cross_blocks:
        on = old_new_block(stats)
        no = new_old_block(stats, on)
    else:
        on = np.zeros((prev.size, stats.new_count))
        no = np.zeros((stats.new_count, prev.size))
    return assemble(prev, nn, on, no, new_class_ids)


# ---------------------------------------------------------------------------
# heatmap-friendly exports
# ---------------------------------------------------------------------------

def class_name(class_id):
    return f"class_{class_id}"


def acm_json_dict(corr, task_index=None):
    """JSON-ready dict: full matrix plus named blocks (old-* blocks only
    when a previous task exists)."""
    blocks = {name: block.tolist() for name, block in corr.blocks().items()}
    out = {
        "format": "lifegcn-acm",
        "version": 1,
        "size": corr.size,
        "boundary": corr.boundary,
        "class_ids": list(corr.class_ids),
        "class_names": [class_name(c) for c in corr.class_ids],
        "matrix": corr.matrix.tolist(),
        "blocks": blocks,
    }
    if task_index is not None:
        out["task"] = int(task_index)
    return out


def corr_from_json_dict(payload):
    if payload.get("format") != "lifegcn-acm":
        raise DataError(f"not a correlation-matrix payload: "
                        f"format={payload.get('format')!r}")
    return CorrelationMatrix(np.array(payload["matrix"], dtype=np.float64),
                             payload["boundary"], payload["class_ids"])


def write_acm_json(corr, path, task_index=None):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(acm_json_dict(corr, task_index), fh, indent=2)
        fh.write("\n")


def write_acm_csv(corr, path):
    """Dense CSV with class names as header row and leading column."""
    names = [class_name(c) for c in corr.class_ids]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class"] + names)
        for name, row in zip(names, corr.matrix):
            writer.writerow([name] + [repr(float(v)) for v in row])
