"""Single-pass task-sequential training loop.

Tasks arrive in order; each training example is consumed exactly once, in
stream order, in fixed-size minibatches. On the first task the model
minimizes plain classification loss over that task's classes. On later
tasks the frozen expert supplies soft labels for the old classes; the label
statistics grow the correlation matrix every batch; and the objective adds
distillation over the old classes and a penalty on moving the old node
representations. After each task the loop snapshots the expert, stores the
assembled correlation matrix, and evaluates on every seen task's test set.

Modes:
  agcn          full method (default)
  finetune      new-class supervision only; no expert, no cross-task blocks
  distill-only  expert distillation kept, node-representation penalty off

The intra-only ablation keeps training identical but zeroes the cross-task
correlation blocks.
"""

import csv
import dataclasses
import io
import json
import os

import numpy as np

from . import backbone as backbone_mod
from . import correlation
from . import graph as graph_mod
from . import kernels
from . import losses
from . import metrics as metrics_mod
from . import numerics
from . import stream as stream_mod
from .errors import ConfigError, DataError, NumericError
from .expert import ExpertSnapshot

MODES = ("agcn", "finetune", "distill-only")
ABLATIONS = ("none", "intra-only")


@dataclasses.dataclass
class TrainConfig:
    """Every knob of a run; all fields settable from a key=value file,
    LIFEGCN_* environment variables, or CLI flags."""

    lambda1: float = losses.DEFAULT_LAMBDA1
    lambda2: float = losses.DEFAULT_LAMBDA2
    lambda3: float = losses.DEFAULT_LAMBDA3
    learning_rate: float = numerics.DEFAULT_LEARNING_RATE
    adam_beta1: float = numerics.DEFAULT_BETA1
    adam_beta2: float = numerics.DEFAULT_BETA2
    adam_eps: float = numerics.DEFAULT_EPS
    batch_size: int = 16
    seed: int = 0
    embed_dim: int = graph_mod.DEFAULT_EMBED_DIM
    graph_hidden: int = graph_mod.DEFAULT_HIDDEN_DIM
    feature_dim: int = graph_mod.DEFAULT_OUT_DIM
    input_dim: int = backbone_mod.DEFAULT_IN_DIM
    backbone_hidden: int = backbone_mod.DEFAULT_HIDDEN
    threshold: float = 0.7
    normalize_adjacency: bool = True
    leaky_slope: float = graph_mod.DEFAULT_LEAKY_SLOPE
    mode: str = "agcn"
    ablate: str = "none"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("threshold must lie in (0, 1)")
        for name in ("lambda1", "lambda2", "lambda3"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        for name in ("embed_dim", "graph_hidden", "feature_dim",
                     "input_dim", "backbone_hidden"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, "
                              f"got {self.mode!r}")
        if self.ablate not in ABLATIONS:
            raise ConfigError(f"ablate must be one of {ABLATIONS}, "
                              f"got {self.ablate!r}")

    def as_dict(self):
        return dataclasses.asdict(self)


ENV_PREFIX = "LIFEGCN_"

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(TrainConfig)}

_BOOL_WORDS = {"1": True, "true": True, "yes": True, "on": True,
               "0": False, "false": False, "no": False, "off": False}


def _coerce(key, raw):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if kind in ("bool", bool):
            word = raw.lower()
            if word not in _BOOL_WORDS:
                raise ValueError(f"not a boolean: {raw!r}")
            return _BOOL_WORDS[word]
        if kind in ("int", int):
            return int(raw)
        if kind in ("float", float):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from exc


def parse_config_text(text, source="<config>"):
    """Flat key = value lines; '#' starts a comment; unknown keys rejected."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value, "
                              f"got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{source}:{lineno}: unknown config key "
                              f"{key!r}")
        values[key] = _coerce(key, raw)
    return values


def load_config(path=None, env=None, overrides=None, base=None):
    """Layered config: defaults (or `base`), then file, then LIFEGCN_*
    environment variables, then explicit overrides (CLI flags)."""
    values = {} if base is None else base.as_dict()
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            values.update(parse_config_text(fh.read(), source=str(path)))
    env = os.environ if env is None else env
    for key in _FIELD_TYPES:
        env_key = ENV_PREFIX + key.upper()
        if env_key in env:
            values[key] = _coerce(key, env[env_key])
    for key, val in (overrides or {}).items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = val if not isinstance(val, str) else _coerce(key, val)
    return TrainConfig(**values)


class TrainRecord:
    """Everything measured during a run: boundary metrics, loss curves,
    and the single-pass example counter."""

    METRIC_COLUMNS = ("after_task", "eval_task", "mAP", "CF1", "OF1")
    LOSS_COLUMNS = ("task", "step", "examples_seen", "total", "cls", "dst",
                    "gph")

    def __init__(self):
        self.metric_rows = []
        self.loss_rows = []
        self.examples_seen = 0
        self.final_summary = {}
        self._seen_pairs = set()

    def record_eval(self, after_task, eval_task, report):
        key = (int(after_task), int(eval_task))
        if key in self._seen_pairs:
            raise DataError(f"evaluation {key} recorded twice")
        self._seen_pairs.add(key)
        self.metric_rows.append({
            "after_task": key[0], "eval_task": key[1],
            "mAP": report.map_, "CF1": report.cf1, "OF1": report.of1,
        })

    def record_loss(self, task, step, parts):
        self.loss_rows.append({
            "task": int(task), "step": int(step),
            "examples_seen": self.examples_seen,
            "total": parts.total, "cls": parts.cls_value,
            "dst": parts.dst_value, "gph": parts.gph_value,
        })

    def a_values(self, metric="mAP"):
        """{(after_task, eval_task): value} over per-task rows, the input
        to the forgetting measure."""
        return {(r["after_task"], r["eval_task"]): r[metric]
                for r in self.metric_rows if r["eval_task"] >= 1}

    def final_value(self, metric="mAP"):
        """Union-of-seen-tasks score at the last boundary."""
        last = max((r["after_task"] for r in self.metric_rows), default=None)
        if last is None:
            raise DataError("no evaluations recorded")
        for r in self.metric_rows:
            if r["after_task"] == last and r["eval_task"] == 0:
                return r[metric]
        raise DataError("no union evaluation recorded at the last boundary")

    def metrics_csv_text(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.METRIC_COLUMNS)
        for r in self.metric_rows:
            writer.writerow([r["after_task"], r["eval_task"],
                             repr(float(r["mAP"])), repr(float(r["CF1"])),
                             repr(float(r["OF1"]))])
        return buf.getvalue()

    def losses_csv_text(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.LOSS_COLUMNS)
        for r in self.loss_rows:
            writer.writerow([r["task"], r["step"], r["examples_seen"],
                             repr(float(r["total"])), repr(float(r["cls"])),
                             repr(float(r["dst"])), repr(float(r["gph"]))])
        return buf.getvalue()

    def write_metrics_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.metrics_csv_text())

    def write_losses_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.losses_csv_text())

    def as_json_dict(self):
        return {"metrics": self.metric_rows, "losses": self.loss_rows,
                "examples_seen": self.examples_seen,
                "final_summary": self.final_summary}


@dataclasses.dataclass
class RunResult:
    record: TrainRecord
    backbone: object
    graph: object
    embeddings: object
    corr_history: list
    expert: object
    config: TrainConfig


def predict(features, backbone, graph, corr, node_matrix, threshold=0.7,
            normalize_adjacency=True):
    """Scores over all seen classes plus the emitted global class ids.

    A 1-D input yields (vector, set); a batch yields (matrix, list of
    sets). Emission uses a strict > comparison.
    """
    adjacency = corr.graph_view(normalize_adjacency)
    node_repr = graph.forward(adjacency, node_matrix)
    single = np.asarray(features).ndim == 1
    extracted = backbone.extract(features)
    batch = extracted[np.newaxis, :] if single else extracted
    scores = kernels.sigmoid(np.ascontiguousarray(batch @ node_repr.T))
    emitted = [{corr.class_ids[i] for i in np.nonzero(row > threshold)[0]}
               for row in scores]
    if single:
        return scores[0], emitted[0]
    return scores, emitted


def _batches(items, size):
    for start in range(0, len(items), size):
        yield items[start:start + size]


def _loss_for_batch(config, task_index, y_new, y_hat, soft, expert_snap,
                    node_repr):
    if task_index == 1:
        value, grad = losses.cls_loss(y_new, y_hat)
        return losses.LossParts(value, value, 0.0, 0.0, grad, None)
    if config.mode == "finetune":
        boundary = y_hat.shape[1] - y_new.shape[1]
        value, grad_new = losses.cls_loss(y_new, y_hat[:, boundary:])
        grad = np.zeros_like(y_hat)
        grad[:, boundary:] = grad_new
        return losses.LossParts(value, value, 0.0, 0.0, grad, None)
    lambda3 = 0.0 if config.mode == "distill-only" else config.lambda3
    weights = losses.LossWeights(config.lambda1, config.lambda2, lambda3)
    return losses.total_loss(weights, y_new, y_hat, soft,
                             expert_snap.stored_graph(), node_repr,
                             task_index)


def _evaluate_boundary(record, after_task, streams, backbone, graph, corr,
                       node_matrix, config):
    """Per-task rows (eval_task = j, task j's own class columns) plus one
    union row (eval_task = 0, all seen classes, all seen test sets)."""
    adjacency = corr.graph_view(config.normalize_adjacency)
    node_repr = graph.forward(adjacency, node_matrix)
    seen_ids = list(corr.class_ids)
    col_of = {c: k for k, c in enumerate(seen_ids)}

    union_scores = []
    union_truth = []
    for j in range(1, after_task + 1):
        test = streams[j - 1].test
        if not test:
            continue
        feats = stream_mod.feature_matrix(test)
        scores = kernels.sigmoid(np.ascontiguousarray(
            backbone.extract(feats) @ node_repr.T))
        union_scores.append(scores)
        union_truth.append(stream_mod.label_matrix(test, seen_ids))
        own_cols = [col_of[c] for c in streams[j - 1].class_ids]
        batch = metrics_mod.EvalBatch(
            scores[:, own_cols],
            stream_mod.label_matrix(test, streams[j - 1].class_ids),
            config.threshold)
        record.record_eval(after_task, j, metrics_mod.evaluate(batch))
    if union_scores:
        batch = metrics_mod.EvalBatch(np.vstack(union_scores),
                                      np.vstack(union_truth),
                                      config.threshold)
        record.record_eval(after_task, 0, metrics_mod.evaluate(batch))


def run(streams, config):
    """Train through the task sequence once and measure along the way."""
    if not streams:
        raise ConfigError("no task streams")
    for pos, s in enumerate(streams, start=1):
        if s.task_id != pos:
            raise ConfigError(f"streams must be ordered 1..T; position "
                              f"{pos} has task_id {s.task_id}")
        if not s.train:
            raise ConfigError(f"task {pos} has no training examples")
    stream_mod.check_disjoint_tasks(streams)

    bb = backbone_mod.Backbone.init(config.input_dim, config.backbone_hidden,
                                    config.feature_dim, config.seed,
                                    config.leaky_slope)
    gr = graph_mod.GraphHead.init(config.embed_dim, config.graph_hidden,
                                  config.feature_dim, config.seed,
                                  config.leaky_slope)
    hyper = {"lr": config.learning_rate, "beta1": config.adam_beta1,
             "beta2": config.adam_beta2, "eps": config.adam_eps}
    opt = {f"bb_{k}": numerics.AdamState.for_param(p, **hyper)
           for k, p in bb.params().items()}
    opt.update({f"gr_{k}": numerics.AdamState.for_param(p, **hyper)
                for k, p in gr.params().items()})

    use_expert = config.mode != "finetune"
    use_cross = use_expert and config.ablate != "intra-only"

    record = TrainRecord()
    corr_history = []
    expert_snap = None
    prev_corr = None
    seen_ids = []
    embeddings = None

    for t, task in enumerate(streams, start=1):
        new_ids = list(task.class_ids)
        seen_ids = seen_ids + new_ids
        embeddings = graph_mod.init_embeddings(seen_ids, config.embed_dim,
                                               config.seed)
        h0 = embeddings.matrix
        stats = correlation.LabelStats(len(new_ids), len(seen_ids)
                                       - len(new_ids))
        corr = None
        for step, batch in enumerate(_batches(task.train,
                                              config.batch_size), start=1):
            feats = stream_mod.feature_matrix(batch)
            y_new = stream_mod.label_matrix(batch, new_ids)
            record.examples_seen += len(batch)

            soft = None
            if expert_snap is not None and use_expert:
                soft = expert_snap.soft_labels(feats)
            correlation.observe_batch(stats, y_new,
                                      soft if use_cross else None)
            corr = correlation.build(stats, prev_corr, new_ids, use_cross)
            adjacency = corr.graph_view(config.normalize_adjacency)

            node_repr, g_cache = gr.forward_cached(adjacency, h0)
            extracted, b_cache = bb.extract_cached(feats)
            logits = np.ascontiguousarray(extracted @ node_repr.T)
            y_hat = kernels.sigmoid(logits)

            parts = _loss_for_batch(config, t, y_new, y_hat, soft,
                                    expert_snap, node_repr)
            if not np.isfinite(parts.total):
                raise NumericError(f"non-finite loss at task {t} step "
                                   f"{step}: {parts.total!r}")
            record.record_loss(t, step, parts)

            grad_logits = parts.grad_yhat * y_hat * (1.0 - y_hat)
            grad_extracted = grad_logits @ node_repr
            grad_node = grad_logits.T @ extracted
            if parts.grad_node is not None:
                grad_node = grad_node + parts.grad_node

            bb_grads = bb.backward(b_cache, grad_extracted)
            gr_grads = gr.backward(g_cache, grad_node)
            for name, grad in bb_grads.items():
                numerics.adam_step(bb.params()[name], grad, opt[f"bb_{name}"])
            for name, grad in gr_grads.items():
                numerics.adam_step(gr.params()[name], grad, opt[f"gr_{name}"])

        corr_history.append(corr)
        prev_corr = corr
        if use_expert:
            expert_snap = ExpertSnapshot(bb, gr, corr, h0, t,
                                         config.normalize_adjacency)
        _evaluate_boundary(record, t, streams, bb, gr, corr, h0, config)

    _summarize(record, len(streams))
    return RunResult(record, bb, gr, embeddings, corr_history, expert_snap,
                     config)


def _summarize(record, task_count):
    summary = {"examples_seen": record.examples_seen, "final": {},
               "forgetting": {}}
    for metric in ("mAP", "CF1", "OF1"):
        try:
            summary["final"][metric] = record.final_value(metric)
        except DataError:
            continue
        if task_count >= 2:
            summary["forgetting"][metric] = metrics_mod.forgetting(
                record.a_values(metric), task_count)
    record.final_summary = summary


def write_record_json(record, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record.as_json_dict(), fh, indent=2)
        fh.write("\n")
