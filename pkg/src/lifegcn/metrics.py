"""Multi-label evaluation: thresholded precision/recall/F1 families,
ranking-based average precision, and the forgetting measure.

Overall (micro) metrics pool true-positive, predicted, and ground-truth
counts across classes; per-class (macro) metrics average the per-class
ratios, with zero-denominator classes contributing 0 and the mean taken
over the full class count. Average precision is threshold-free: examples
are ranked by score (ties broken by input order) and precision is averaged
at each positive's rank. Forgetting compares a task's current score
against the best score it ever achieved at earlier boundaries.
"""

import numpy as np

from .errors import DataError, DomainError, ShapeError


class EvalBatch:
    """Scores and ground truth over a fixed class column order."""

    def __init__(self, scores, truth, threshold=0.7):
        self.scores = np.ascontiguousarray(scores, dtype=np.float64)
        self.truth = np.ascontiguousarray(truth, dtype=np.float64)
        if self.scores.ndim != 2:
            raise ShapeError("scores must be (examples, classes)")
        if self.truth.shape != self.scores.shape:
            raise ShapeError(f"truth shape {self.truth.shape} does not "
                             f"match scores {self.scores.shape}")
        if self.scores.shape[0] < 1:
            raise DataError("evaluation needs at least one example")
        if np.any(self.scores < 0.0) or np.any(self.scores > 1.0):
            raise DomainError("scores outside [0, 1]")
        if not np.all((self.truth == 0.0) | (self.truth == 1.0)):
            raise DomainError("ground truth must be 0 or 1")
        self.threshold = float(threshold)

    @property
    def class_count(self):
        return self.scores.shape[1]


class MetricReport:
    """Six thresholded metrics plus mAP, all in [0, 1]."""

    FIELDS = ("OP", "CP", "OR", "CR", "OF1", "CF1", "mAP")

    def __init__(self, op, cp, or_, cr, of1, cf1, map_=None):
        self.op = float(op)
        self.cp = float(cp)
        self.or_ = float(or_)
        self.cr = float(cr)
        self.of1 = float(of1)
        self.cf1 = float(cf1)
        self.map_ = None if map_ is None else float(map_)

    def as_dict(self):
        out = {"OP": self.op, "CP": self.cp, "OR": self.or_,
               "CR": self.cr, "OF1": self.of1, "CF1": self.cf1}
        if self.map_ is not None:
            out["mAP"] = self.map_
        return out

    def csv_row(self):
        return [repr(float(self.as_dict()[k])) for k in self.FIELDS
                if k in self.as_dict()]

    def __repr__(self):
        parts = ", ".join(f"{k}={v:.4f}" for k, v in self.as_dict().items())
        return f"MetricReport({parts})"


def _ratio(num, den):
    return num / den if den > 0 else 0.0


def _guarded_f1(p, r):
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


def prf_metrics(batch):
    """Thresholded overall/per-class precision, recall, and F1."""
    pred = batch.scores > batch.threshold
    truth = batch.truth > 0.5
    correct = (pred & truth).sum(axis=0).astype(np.float64)
    predicted = pred.sum(axis=0).astype(np.float64)
    actual = truth.sum(axis=0).astype(np.float64)

    op = _ratio(correct.sum(), predicted.sum())
    or_ = _ratio(correct.sum(), actual.sum())
    n_cls = batch.class_count
    cp = sum(_ratio(c, p) for c, p in zip(correct, predicted)) / n_cls
    cr = sum(_ratio(c, g) for c, g in zip(correct, actual)) / n_cls
    return MetricReport(op, cp, or_, cr, _guarded_f1(op, or_),
                        _guarded_f1(cp, cr))


def average_precision(scores, truth):
    """AP for one class: mean precision at each positive's rank, examples
    ordered by descending score with ties kept in input order."""
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64) > 0.5
    if not truth.any():
        raise DataError("average precision undefined without positives")
    n = scores.shape[0]
    order = np.lexsort((np.arange(n), -scores))
    ranked = truth[order]
    hits = np.cumsum(ranked)
    ranks = np.arange(1, n + 1, dtype=np.float64)
    return float(np.mean(hits[ranked] / ranks[ranked]))


def mean_average_precision(batch):
    """Mean AP over the classes that have at least one positive."""
    truth = batch.truth > 0.5
    with_pos = [j for j in range(batch.class_count) if truth[:, j].any()]
    if not with_pos:
        raise DataError("no class has a positive example")
    aps = [average_precision(batch.scores[:, j], batch.truth[:, j])
           for j in with_pos]
    return float(np.mean(aps))


def evaluate(batch):
    """Full report: thresholded metrics plus mAP."""
    report = prf_metrics(batch)
    report.map_ = mean_average_precision(batch)
    return report


def forgetting(a_values, t):
    """Average forgetting after task t.

    `a_values` maps (after_task, eval_task) to a metric value. For each
    earlier task j the drop is the best value seen at boundaries j..t-1
    minus the value at t; the average runs over j = 1..t-1. Negative
    results mean the old task improved.
    """
    t = int(t)
    if t < 2:
        raise DataError("forgetting needs at least two tasks")
    drops = []
    for j in range(1, t):
        try:
            best = max(a_values[(l, j)] for l in range(j, t))
            current = a_values[(t, j)]
        except KeyError as exc:
            raise DataError(f"missing recorded value a{exc.args[0]}") from exc
        drops.append(best - current)
    return float(np.mean(drops))
