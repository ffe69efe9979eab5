"""Command-line front end: dataset generation, splitting, training runs,
and correlation-matrix export.

Every command is deterministic given its flags and seed; outputs carry no
timestamps. All artifacts of one invocation land under a single output
directory whose manifest.json is rewritten after each file, so an
interrupted run still leaves a valid (partial) manifest.

Exit codes: 0 success, 2 configuration or input schema problems,
3 numeric failure during training, 1 filesystem errors.
"""

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import checkpoint
from . import correlation
from . import presets
from . import stream as stream_mod
from . import trainer
from .errors import (ConfigError, DataError, DomainError, NumericError,
                     ShapeError)
from .expert import ExpertSnapshot

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class RunManifest:
    """Output-directory inventory, rewritten after every artifact."""

    def __init__(self, out_dir, run_id, seed, config_dict=None):
        self.out_dir = out_dir
        self.path = os.path.join(out_dir, "manifest.json")
        self.doc = {"format": "lifegcn-run", "version": 1,
                    "run_id": run_id, "seed": int(seed),
                    "config": config_dict or {}, "files": []}
        self.flush()

    def add(self, filename):
        self.doc["files"].append(filename)
        self.flush()

    def flush(self):
        tmp = self.path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(self.doc, fh, indent=2)
            fh.write("\n")
        os.replace(tmp, self.path)


def _run_id(payload):
    text = json.dumps(payload, sort_keys=True)
    return hashlib.sha1(text.encode("utf-8")).hexdigest()[:12]


def _ensure_out(path):
    os.makedirs(path, exist_ok=True)
    return path


def _percent(x):
    return f"{100.0 * x:.2f}"


def _labeling_report(streams):
    """Special/mixed counts for already-built streams (generator output)."""
    special, mixed = [], []
    for s in streams:
        sp = sum(1 for ex in s.train + s.test if ex.labels <= s.class_set)
        special.append(sp)
        mixed.append(len(s.train) + len(s.test) - sp)
    return stream_mod.SplitReport(special, mixed)


def _print_report(streams, report, out=None):
    out = sys.stdout if out is None else out
    print("task  classes              special  mixed", file=out)
    for s, sp, mx in zip(streams, report.special_counts,
                         report.mixed_counts):
        cls = ",".join(str(c) for c in s.class_ids)
        print(f"{s.task_id:<5} {cls:<20} {sp:<8} {mx}", file=out)
    if report.rejected_ids:
        print(f"rejected: {len(report.rejected_ids)} example(s)", file=out)


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def _load_target(path, class_count):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    matrix = doc["matrix"] if isinstance(doc, dict) else doc
    target = np.asarray(matrix, dtype=np.float64)
    if target.shape != (class_count, class_count):
        raise ConfigError(f"target matrix in {path} has shape "
                          f"{target.shape}, expected ({class_count}, "
                          f"{class_count})")
    return target


def cmd_generate(args):
    out = _ensure_out(args.out)
    if args.target:
        target = _load_target(args.target, args.classes)
    else:
        target = presets.benchmark_target(args.classes, args.tasks)
    streams = stream_mod.generate_synthetic(
        args.classes, args.tasks, target, args.examples_per_task,
        args.feature_dim, args.seed, test_per_task=args.test_per_task,
        noise_scale=args.noise)
    manifest = RunManifest(out, _run_id({
        "cmd": "generate", "seed": args.seed, "classes": args.classes,
        "tasks": args.tasks, "examples_per_task": args.examples_per_task,
        "test_per_task": args.test_per_task,
        "feature_dim": args.feature_dim, "noise": args.noise,
        "target": target.tolist()}), args.seed)

    corpus = [ex for s in streams for ex in s.train + s.test]
    stream_mod.write_examples_jsonl(corpus, os.path.join(out,
                                                         "corpus.jsonl"))
    manifest.add("corpus.jsonl")
    report = _labeling_report(streams)
    stream_mod.write_split_manifest(streams, report,
                                    os.path.join(out, "split.json"))
    manifest.add("split.json")
    _print_report(streams, report)
    print(f"wrote {len(corpus)} examples to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# split
# ---------------------------------------------------------------------------

def _parse_partition(spec):
    if os.path.exists(spec):
        with open(spec, "r", encoding="utf-8") as fh:
            try:
                cells = json.load(fh)
            except ValueError as exc:
                raise ConfigError(f"{spec}: not valid JSON: {exc}") from exc
    else:
        try:
            cells = [[int(c) for c in cell.split(",") if c.strip() != ""]
                     for cell in spec.split(";")]
        except ValueError as exc:
            raise ConfigError(f"bad partition spec {spec!r}: {exc}") from exc
    if not isinstance(cells, list) or not all(isinstance(c, list)
                                              for c in cells):
        raise ConfigError(f"partition must be a list of class id lists")
    return cells


def cmd_split(args):
    out = _ensure_out(args.out)
    examples = stream_mod.read_examples_jsonl(args.data)
    cells = _parse_partition(args.partition)
    present = set()
    for ex in examples:
        present |= ex.labels
    for cell in cells:
        unknown = [c for c in cell if c not in present]
        if unknown:
            raise ConfigError(f"partition references classes {unknown} "
                              f"absent from {args.data}")
    streams, report = stream_mod.split_dataset(
        examples, cells, test_fraction=args.test_fraction, seed=args.seed)
    manifest = RunManifest(out, _run_id({
        "cmd": "split", "seed": args.seed, "partition": cells,
        "test_fraction": args.test_fraction}), args.seed)
    for s in streams:
        train_name = f"task{s.task_id}_train.jsonl"
        test_name = f"task{s.task_id}_test.jsonl"
        stream_mod.write_examples_jsonl(s.train, os.path.join(out,
                                                              train_name))
        manifest.add(train_name)
        stream_mod.write_examples_jsonl(s.test, os.path.join(out, test_name))
        manifest.add(test_name)
    stream_mod.write_split_manifest(streams, report,
                                    os.path.join(out, "split.json"))
    manifest.add("split.json")
    _print_report(streams, report)
    return EXIT_OK


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def _train_overrides(args):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.mode is not None:
        overrides["mode"] = args.mode
    if args.ablate is not None:
        overrides["ablate"] = args.ablate
    if args.threshold is not None:
        overrides["threshold"] = args.threshold
    return overrides


def cmd_train(args):
    out = _ensure_out(args.out)
    if bool(args.data) != bool(args.manifest):
        raise ConfigError("--data and --manifest must be given together")
    if args.data:
        base = None
        config = trainer.load_config(args.config,
                                     overrides=_train_overrides(args))
        examples = stream_mod.read_examples_jsonl(args.data)
        with open(args.manifest, "r", encoding="utf-8") as fh:
            streams = stream_mod.streams_from_manifest(examples,
                                                       json.load(fh))
    else:
        base = presets.benchmark_config()
        config = trainer.load_config(args.config, base=base,
                                     overrides=_train_overrides(args))
        streams = presets.benchmark_streams(config.seed)

    manifest = RunManifest(out, _run_id({"cmd": "train",
                                         "config": config.as_dict()}),
                           config.seed, config.as_dict())
    config_lines = "".join(f"{k} = {v}\n" for k, v in
                           config.as_dict().items())
    with open(os.path.join(out, "config.txt"), "w", encoding="utf-8") as fh:
        fh.write(config_lines)
    manifest.add("config.txt")

    result = trainer.run(streams, config)
    record = result.record

    record.write_metrics_csv(os.path.join(out, "record.csv"))
    manifest.add("record.csv")
    record.write_losses_csv(os.path.join(out, "losses.csv"))
    manifest.add("losses.csv")
    trainer.write_record_json(record, os.path.join(out, "record.json"))
    manifest.add("record.json")
    for t, corr in enumerate(result.corr_history, start=1):
        name = f"acm_task{t}.json"
        correlation.write_acm_json(corr, os.path.join(out, name),
                                   task_index=t)
        manifest.add(name)

    final_model = ExpertSnapshot(result.backbone, result.graph,
                                 result.corr_history[-1],
                                 result.embeddings.matrix, len(streams),
                                 config.normalize_adjacency)
    checkpoint.write_checkpoint(final_model.to_arrays(),
                                os.path.join(out, "model.json"))
    manifest.add("model.json")
    if result.expert is not None:
        checkpoint.write_checkpoint(result.expert.to_arrays(),
                                    os.path.join(out, "expert.json"))
        manifest.add("expert.json")
    with open(os.path.join(out, "summary.json"), "w",
              encoding="utf-8") as fh:
        json.dump(record.final_summary, fh, indent=2)
        fh.write("\n")
    manifest.add("summary.json")

    summary = record.final_summary
    print(f"run {manifest.doc['run_id']} mode={config.mode} "
          f"ablate={config.ablate} seed={config.seed} "
          f"examples={record.examples_seen}")
    final = summary.get("final", {})
    if final:
        print("final      " + "  ".join(f"{k} {_percent(v)}"
                                        for k, v in final.items()))
    forg = summary.get("forgetting", {})
    if forg:
        print("forgetting " + "  ".join(f"{k} {_percent(v)}"
                                        for k, v in forg.items()))
    print(f"artifacts in {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# export-acm
# ---------------------------------------------------------------------------

def cmd_export_acm(args):
    source = os.path.join(args.run, f"acm_task{args.task}.json")
    if not os.path.exists(source):
        raise ConfigError(f"run {args.run} has no stored correlation "
                          f"matrix for task {args.task}")
    with open(source, "r", encoding="utf-8") as fh:
        corr = correlation.corr_from_json_dict(json.load(fh))
    out = _ensure_out(args.out or args.run)
    csv_path = os.path.join(out, f"acm_task{args.task}.csv")
    json_path = os.path.join(out, f"acm_task{args.task}.json")
    correlation.write_acm_csv(corr, csv_path)
    if os.path.abspath(json_path) != os.path.abspath(source):
        correlation.write_acm_json(corr, json_path, task_index=args.task)
    print(f"wrote {csv_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="lifegcn",
        description="Lifelong multi-label learning with an augmented "
                    "label-correlation graph.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic correlated "
                                          "multi-label dataset")
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--classes", type=int,
                     default=presets.BENCHMARK_CLASSES)
    gen.add_argument("--tasks", type=int, default=presets.BENCHMARK_TASKS)
    gen.add_argument("--examples-per-task", type=int,
                     default=presets.BENCHMARK_TRAIN_PER_TASK)
    gen.add_argument("--test-per-task", type=int,
                     default=presets.BENCHMARK_TEST_PER_TASK)
    gen.add_argument("--feature-dim", type=int,
                     default=presets.BENCHMARK_INPUT_DIM)
    gen.add_argument("--noise", type=float, default=presets.BENCHMARK_NOISE)
    gen.add_argument("--target", help="JSON file with the target "
                                      "conditional-probability matrix")
    gen.set_defaults(func=cmd_generate)

    spl = sub.add_parser("split", help="assign a corpus to tasks by class "
                                       "partition")
    spl.add_argument("--data", required=True, help="corpus JSONL")
    spl.add_argument("--partition", required=True,
                     help="JSON file or inline spec like '0,1,2;3,4,5'")
    spl.add_argument("--out", required=True)
    spl.add_argument("--test-fraction", type=float, default=0.0)
    spl.add_argument("--seed", type=int, default=0)
    spl.set_defaults(func=cmd_split)

    trn = sub.add_parser("train", help="run single-pass task-sequential "
                                       "training")
    trn.add_argument("--out", required=True, help="run directory")
    trn.add_argument("--config", help="key = value config file")
    trn.add_argument("--seed", type=int, default=None)
    trn.add_argument("--mode", choices=list(trainer.MODES), default=None)
    trn.add_argument("--ablate", choices=list(trainer.ABLATIONS),
                     default=None)
    trn.add_argument("--threshold", type=float, default=None)
    trn.add_argument("--data", help="corpus JSONL (with --manifest); "
                                    "defaults to the bundled benchmark")
    trn.add_argument("--manifest", help="split manifest JSON")
    trn.set_defaults(func=cmd_train)

    exp = sub.add_parser("export-acm", help="export a stored correlation "
                                            "matrix as CSV + JSON")
    exp.add_argument("--run", required=True, help="training run directory")
    exp.add_argument("--task", type=int, required=True)
    exp.add_argument("--out", default=None)
    exp.set_defaults(func=cmd_export_acm)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DataError, DomainError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
