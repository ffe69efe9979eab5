"""Multi-label examples, task streams, the special/mixed splitter, and a
synthetic correlated-stream generator.

An example belongs to exactly one task's training stream. During training
only the labels inside the owning task's class set are visible (partial
labels); ground truth over earlier classes is reconstructed from expert
predictions elsewhere. Test examples keep their full label sets and are
restricted to the classes seen so far at evaluation time.

The generator produces label sets whose empirical pairwise conditional
frequencies approach a target matrix. Each example draws one seed class
uniformly from its task, then includes every other class independently with
a calibrated probability; naive use of the target as the inclusion
probability would overshoot, so the inclusion matrix is fitted by fixed
point iteration against the closed-form conditionals implied by the
sampling process.
"""

import json

import numpy as np

from .errors import ConfigError, DataError, ShapeError


class Example:
    """One data point: a float feature vector and a set of class ids."""

    __slots__ = ("id", "features", "labels")

    def __init__(self, example_id, features, labels):
        self.id = str(example_id)
        self.features = np.ascontiguousarray(features, dtype=np.float64)
        if self.features.ndim != 1:
            raise ShapeError("features must be a 1-d vector")
        self.labels = frozenset(int(c) for c in labels)
        if not self.labels:
            raise DataError(f"example {self.id!r} carries no labels")
        if any(c < 0 for c in self.labels):
            raise DataError(f"example {self.id!r} has a negative class id")

    def __repr__(self):
        return (f"Example(id={self.id!r}, dim={self.features.shape[0]}, "
                f"labels={sorted(self.labels)})")


def validate_examples(examples, class_count, feature_dim):
    """Corpus-level invariants: label ids inside range, uniform feature dim."""
    for ex in examples:
        if ex.features.shape[0] != feature_dim:
            raise DataError(f"example {ex.id!r} has feature dim "
                            f"{ex.features.shape[0]}, expected {feature_dim}")
        bad = [c for c in ex.labels if c >= class_count]
        if bad:
            raise DataError(f"example {ex.id!r} references class ids {bad} "
                            f">= class count {class_count}")


class TaskStream:
    """One task: an ordered class set plus train and test example lists."""

    def __init__(self, task_id, class_ids, train, test):
        if task_id < 1:
            raise ConfigError("task ids are 1-based")
        self.task_id = int(task_id)
        self.class_ids = tuple(int(c) for c in class_ids)
        if len(set(self.class_ids)) != len(self.class_ids):
            raise ConfigError(f"task {task_id} repeats a class id")
        self.class_set = frozenset(self.class_ids)
        self.train = list(train)
        self.test = list(test)
        for ex in self.train:
            if not (ex.labels & self.class_set):
                raise DataError(f"train example {ex.id!r} has no visible "
                                f"label in task {task_id}")

    def visible_labels(self, example):
        """Training-time label view: only this task's classes."""
        return example.labels & self.class_set

    def __repr__(self):
        return (f"TaskStream(task_id={self.task_id}, "
                f"classes={list(self.class_ids)}, "
                f"train={len(self.train)}, test={len(self.test)})")


def check_disjoint_tasks(streams):
    seen = set()
    for s in streams:
        overlap = seen & s.class_set
        if overlap:
            raise ConfigError(f"class ids {sorted(overlap)} appear in more "
                              f"than one task")
        seen |= s.class_set


def label_matrix(examples, class_ids):
    """Binary (n, len(class_ids)) matrix of label membership.

    Restricting the column set restricts the visible labels, so the same
    helper serves partial-label training (task classes only) and
    evaluation over all seen classes.
    """
    index = {int(c): k for k, c in enumerate(class_ids)}
    out = np.zeros((len(examples), len(index)), dtype=np.float64)
    for row, ex in enumerate(examples):
        for c in ex.labels:
            k = index.get(c)
            if k is not None:
                out[row, k] = 1.0
    return out


def feature_matrix(examples):
    if not examples:
        raise DataError("empty example list")
    return np.ascontiguousarray(np.stack([ex.features for ex in examples]))


class SplitReport:
    """Per-task special/mixed assignment counts plus rejected example ids."""

    def __init__(self, special_counts, mixed_counts, rejected_ids=()):
        self.special_counts = tuple(int(n) for n in special_counts)
        self.mixed_counts = tuple(int(n) for n in mixed_counts)
        self.rejected_ids = tuple(rejected_ids)

    @property
    def assigned_total(self):
        return sum(self.special_counts) + sum(self.mixed_counts)

    def as_dict(self):
        return {
            "special_counts": list(self.special_counts),
            "mixed_counts": list(self.mixed_counts),
            "rejected_ids": list(self.rejected_ids),
        }


def split_dataset(examples, class_partition, test_fraction=0.0, seed=0):
    """Assign each example to exactly one task.

    Examples whose labels all sit inside one partition cell keep that
    cell's task (special labeling). The rest (mixed labeling) go to the
    eligible task with the smallest current training size, ties broken by
    the lowest task id. Examples touching no cell are rejected and listed
    in the report. `test_fraction` carves a deterministic per-task test
    split out of the assigned examples.
    """
    cells = [frozenset(int(c) for c in cell) for cell in class_partition]
    if not cells:
        raise ConfigError("empty class partition")
    for k, cell in enumerate(cells):
        if not cell:
            raise ConfigError(f"partition cell {k} is empty")
    claimed = set()
    for cell in cells:
        if claimed & cell:
            raise ConfigError("partition cells overlap")
        claimed |= cell
    if not 0.0 <= test_fraction < 1.0:
        raise ConfigError("test_fraction must be in [0, 1)")

    assigned = [[] for _ in cells]
    special = [0] * len(cells)
    mixed_pending = []
    rejected = []
    for ex in examples:
        eligible = [k for k, cell in enumerate(cells) if ex.labels & cell]
        if not eligible:
            rejected.append(ex.id)
            continue
        if len(eligible) == 1 and ex.labels <= cells[eligible[0]]:
            assigned[eligible[0]].append(ex)
            special[eligible[0]] += 1
        else:
            mixed_pending.append((ex, eligible))

    mixed = [0] * len(cells)
    for ex, eligible in mixed_pending:
        sizes = [(len(assigned[k]), k) for k in eligible]
        _, target = min(sizes)
        assigned[target].append(ex)
        mixed[target] += 1

    streams = []
    for k, cell in enumerate(cells):
        pool = assigned[k]
        n_test = int(round(test_fraction * len(pool)))
        if n_test > 0:
            rng = np.random.default_rng([seed, k + 1])
            test_idx = set(rng.choice(len(pool), size=n_test, replace=False))
            train = [ex for i, ex in enumerate(pool) if i not in test_idx]
            test = [ex for i, ex in enumerate(pool) if i in test_idx]
        else:
            train, test = pool, []
        streams.append(TaskStream(k + 1, sorted(cell), train, test))
    return streams, SplitReport(special, mixed, rejected)


# ---------------------------------------------------------------------------
# synthetic correlated streams
# ---------------------------------------------------------------------------

_PROTO_TAG = 0x70726F74


def partition_classes(class_count, task_count):
    if task_count < 1 or class_count < task_count:
        raise ConfigError(f"cannot split {class_count} classes into "
                          f"{task_count} non-empty tasks")
    return [list(map(int, cell))
            for cell in np.array_split(np.arange(class_count), task_count)]


def implied_conditionals(inclusion, weights):
    """Closed-form P(i present | j present) for the seed-plus-independent-
    inclusion sampling process, given seed-class weights."""
    marginal = weights + inclusion @ weights
    scaled = inclusion * weights[np.newaxis, :]
    joint = scaled + scaled.T + scaled @ inclusion.T
    cond = joint / marginal[np.newaxis, :]
    np.fill_diagonal(cond, 1.0)
    return cond


def seed_weights(class_count, task_count):
    """Probability that a generated example seeds each class (tasks are
    equally sized in examples; seeds are uniform within a task)."""
    weights = np.zeros(class_count)
    for cell in partition_classes(class_count, task_count):
        for c in cell:
            weights[c] = 1.0 / (task_count * len(cell))
    return weights


def calibrate_inclusion(target, weights, tol=2e-3, max_rounds=4000):
    """Fit the secondary-inclusion matrix so implied conditionals match the
    target. Damped multiplicative fixed-point updates; failure to converge
    means the target is infeasible for this process (conditionals below
    what transitive inclusion already forces, or above 1-bounded reach)."""
    target = np.asarray(target, dtype=np.float64)
    n = target.shape[0]
    offdiag = ~np.eye(n, dtype=bool)
    active = offdiag & (target > 0.0)
    inclusion = np.clip(target, 0.0, 1.0).copy()
    np.fill_diagonal(inclusion, 0.0)
    inclusion[~active] = 0.0
    for _ in range(max_rounds):
        cond = implied_conditionals(inclusion, weights)
        err = np.max(np.abs(cond[active] - target[active])) if active.any() else 0.0
        if err < tol:
            return inclusion
        ratio = target / np.maximum(cond, 1e-12)
        inclusion = np.clip(inclusion * np.sqrt(ratio), 0.0, 1.0)
        np.fill_diagonal(inclusion, 0.0)
        inclusion[~active] = 0.0
    raise ConfigError(f"co-occurrence targets infeasible: fixed-point "
                      f"calibration residual {err:.4f} after {max_rounds} "
                      f"rounds")


def class_prototypes(class_count, feature_dim, seed):
    rng = np.random.default_rng([seed, _PROTO_TAG])
    return rng.standard_normal((class_count, feature_dim))


def generate_synthetic(class_count, task_count, target_cooccurrence,
                       examples_per_task, feature_dim, seed,
                       test_per_task=0, noise_scale=1.0):
    """Deterministic correlated multi-label streams.

    Every example seeds one class (uniform over the owning task's classes)
    and pulls in others via the calibrated inclusion matrix, so label sets
    regularly cross task boundaries. Features are the sum of per-class
    prototype vectors plus Gaussian noise. `examples_per_task` counts
    training examples; `test_per_task` adds held-out examples drawn from
    the same process.
    """
    target = np.asarray(target_cooccurrence, dtype=np.float64)
    if target.shape != (class_count, class_count):
        raise ConfigError(f"target matrix must be {class_count}x"
                          f"{class_count}, got {target.shape}")
    if np.any(target < 0.0) or np.any(target > 1.0):
        raise ConfigError("target conditionals must lie in [0, 1]")
    if examples_per_task < 1 or test_per_task < 0 or feature_dim < 1:
        raise ConfigError("example counts and feature dim must be positive")

    cells = partition_classes(class_count, task_count)
    weights = seed_weights(class_count, task_count)
    inclusion = calibrate_inclusion(target, weights)
    protos = class_prototypes(class_count, feature_dim, seed)

    rng = np.random.default_rng([seed])
    streams = []
    for t, cell in enumerate(cells, start=1):
        cell_arr = np.asarray(cell)
        splits = {"train": examples_per_task, "test": test_per_task}
        made = {"train": [], "test": []}
        for part, count in splits.items():
            for n in range(count):
                seed_class = int(cell_arr[rng.integers(len(cell_arr))])
                draws = rng.random(class_count)
                members = set(np.nonzero(draws < inclusion[:, seed_class])[0]
                              .tolist())
                members.add(seed_class)
                labels = sorted(members)
                feats = protos[labels].sum(axis=0)
                feats = feats + noise_scale * rng.standard_normal(feature_dim)
                made[part].append(Example(f"t{t}-{part}-{n}", feats, labels))
        streams.append(TaskStream(t, cell, made["train"], made["test"]))
    return streams


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def write_examples_jsonl(examples, path):
    """One example per line: {"id", "features", "labels"}."""
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps({
                "id": ex.id,
                "features": ex.features.tolist(),
                "labels": sorted(ex.labels),
            }))
            fh.write("\n")


def read_examples_jsonl(path):
    examples = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                examples.append(Example(row["id"], row["features"],
                                        row["labels"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: bad example record: "
                                f"{exc}") from exc
    return examples


def split_manifest_dict(streams, report):
    return {
        "format": "lifegcn-split",
        "version": 1,
        "tasks": [{
            "task_id": s.task_id,
            "class_ids": list(s.class_ids),
            "train_ids": [ex.id for ex in s.train],
            "test_ids": [ex.id for ex in s.test],
        } for s in streams],
        "report": report.as_dict(),
    }


def write_split_manifest(streams, report, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(split_manifest_dict(streams, report), fh, indent=2)
        fh.write("\n")


def streams_from_manifest(examples, manifest):
    """Rebuild task streams from a corpus plus a split manifest."""
    if manifest.get("format") != "lifegcn-split":
        raise DataError(f"not a split manifest: "
                        f"format={manifest.get('format')!r}")
    by_id = {ex.id: ex for ex in examples}
    streams = []
    for row in manifest["tasks"]:
        try:
            train = [by_id[i] for i in row["train_ids"]]
            test = [by_id[i] for i in row["test_ids"]]
        except KeyError as exc:
            raise DataError(f"manifest references unknown example id "
                            f"{exc.args[0]!r}") from exc
        streams.append(TaskStream(row["task_id"], row["class_ids"],
                                  train, test))
    check_disjoint_tasks(streams)
    return streams
