import dataclasses
import json

import numpy as np
import pytest

from lifegcn import correlation, graph, metrics, presets, stream, trainer
from lifegcn.errors import ConfigError, DataError

SMALL = dict(input_dim=8, backbone_hidden=8, feature_dim=8, embed_dim=8,
             graph_hidden=8, batch_size=10, learning_rate=0.05, lambda3=1.0)


def _small_streams(classes=4, tasks=2, per_task=60, seed=0, test=20):
    target = presets.benchmark_target(classes, tasks)
    return stream.generate_synthetic(classes, tasks, target, per_task, 8,
                                     seed, test_per_task=test)


def _small_config(**kw):
    merged = dict(SMALL)
    merged.update(kw)
    return trainer.TrainConfig(**merged)


@pytest.fixture(scope="module")
def two_task_run():
    streams = _small_streams(seed=3)
    return streams, trainer.run(streams, _small_config(seed=3))


def test_identical_runs_produce_byte_identical_csvs():
    streams = _small_streams(seed=1)
    first = trainer.run(streams, _small_config(seed=1))
    second = trainer.run(streams, _small_config(seed=1))
    assert first.record.metrics_csv_text() == second.record.metrics_csv_text()
    assert first.record.losses_csv_text() == second.record.losses_csv_text()


def test_single_pass_touches_each_example_once(two_task_run):
    streams, result = two_task_run
    total = sum(len(s.train) for s in streams)
    assert result.record.examples_seen == total
    # The counter also climbs exactly batch-by-batch within the log.
    deltas = []
    rows = result.record.loss_rows
    for prev, cur in zip(rows, rows[1:]):
        deltas.append(cur["examples_seen"] - prev["examples_seen"])
    assert all(0 < d <= SMALL["batch_size"] for d in deltas)


def test_boundary_rows_follow_the_schedule(two_task_run):
    _, result = two_task_run
    pairs = {(r["after_task"], r["eval_task"])
             for r in result.record.metric_rows}
    assert pairs == {(1, 1), (1, 0), (2, 1), (2, 2), (2, 0)}
    assert result.record.final_summary["examples_seen"] == \
        result.record.examples_seen
    assert "mAP" in result.record.final_summary["final"]
    assert "mAP" in result.record.final_summary["forgetting"]


def test_correlation_history_grows_block_structure(two_task_run):
    _, result = two_task_run
    first, second = result.corr_history
    assert first.size == 2 and first.boundary == 0
    assert second.size == 4 and second.boundary == 2
    np.testing.assert_array_equal(second.matrix[:2, :2], first.matrix)
    assert np.all(np.diag(second.matrix) == 1.0)


def test_expert_snapshot_tracks_last_task(two_task_run):
    _, result = two_task_run
    assert result.expert is not None
    assert result.expert.task_index == 2
    assert result.expert.class_count == 4


def test_single_task_run_has_no_forgetting_entry():
    streams = _small_streams(classes=3, tasks=1, per_task=40, seed=5)
    result = trainer.run(streams, _small_config(seed=5))
    assert result.record.final_summary["forgetting"] == {}
    assert result.record.examples_seen == 40
    # First-task training never queries an expert, so loss rows carry no
    # distillation or drift terms.
    assert all(r["dst"] == 0.0 and r["gph"] == 0.0
               for r in result.record.loss_rows)


def test_finetune_mode_skips_expert_and_old_losses():
    streams = _small_streams(seed=2)
    result = trainer.run(streams, _small_config(seed=2, mode="finetune"))
    assert result.expert is None
    assert all(r["dst"] == 0.0 and r["gph"] == 0.0
               for r in result.record.loss_rows)
    # Without soft statistics the cross blocks stay empty.
    final = result.corr_history[-1]
    assert np.all(final.matrix[:2, 2:] == 0.0)
    assert np.all(final.matrix[2:, :2] == 0.0)


def test_intra_only_ablation_zeroes_cross_blocks_but_distills():
    streams = _small_streams(seed=2)
    result = trainer.run(streams, _small_config(seed=2,
                                                ablate="intra-only"))
    final = result.corr_history[-1]
    assert np.all(final.matrix[:2, 2:] == 0.0)
    assert np.all(final.matrix[2:, :2] == 0.0)
    later = [r for r in result.record.loss_rows if r["task"] == 2]
    assert any(r["dst"] > 0.0 for r in later)


def test_distill_only_mode_gives_drift_term_zero_weight():
    streams = _small_streams(seed=4)
    cfg = _small_config(seed=4, mode="distill-only")
    result = trainer.run(streams, cfg)
    later = [r for r in result.record.loss_rows if r["task"] == 2]
    assert any(r["dst"] > 0.0 for r in later)
    # The raw drift value is still logged, but the total omits it.
    for r in later:
        expected = cfg.lambda1 * r["cls"] + cfg.lambda2 * r["dst"]
        assert r["total"] == pytest.approx(expected, rel=1e-12)


def test_run_rejects_misordered_or_overlapping_streams():
    streams = _small_streams(seed=6)
    with pytest.raises(ConfigError):
        trainer.run(list(reversed(streams)), _small_config())
    overlapping = [
        stream.TaskStream(1, streams[0].class_ids, streams[0].train,
                          streams[0].test),
        stream.TaskStream(2, streams[0].class_ids, streams[0].train,
                          streams[0].test),
    ]
    with pytest.raises(ConfigError):
        trainer.run(overlapping, _small_config())


def test_predict_emits_classes_above_threshold(two_task_run):
    streams, result = two_task_run
    corr = result.corr_history[-1]
    feats = stream.feature_matrix(streams[0].test[:5])
    scores, emitted = trainer.predict(
        feats, result.backbone, result.graph, corr,
        result.embeddings.matrix, threshold=0.5)
    assert scores.shape == (5, 4)
    for row, names in zip(scores, emitted):
        expected = {corr.class_ids[i] for i in np.nonzero(row > 0.5)[0]}
        assert names == expected
    one_score, one_set = trainer.predict(
        streams[0].test[0].features, result.backbone, result.graph, corr,
        result.embeddings.matrix, threshold=0.5)
    np.testing.assert_array_equal(one_score, scores[0])
    assert one_set == emitted[0]


def test_record_rejects_duplicate_evaluation():
    record = trainer.TrainRecord()
    report = metrics.evaluate(metrics.EvalBatch(
        np.array([[0.9]]), np.array([[1]])))
    record.record_eval(1, 1, report)
    with pytest.raises(DataError):
        record.record_eval(1, 1, report)


def test_final_value_reads_union_row_only():
    record = trainer.TrainRecord()
    batch = metrics.EvalBatch(np.array([[0.9]]), np.array([[1]]))
    record.record_eval(1, 1, metrics.evaluate(batch))
    with pytest.raises(DataError):
        record.final_value("mAP")
    record.record_eval(1, 0, metrics.evaluate(batch))
    assert record.final_value("mAP") == 1.0
    assert (1, 0) not in record.a_values("mAP")
    assert (1, 1) in record.a_values("mAP")


def test_config_text_parsing_types_and_comments():
    values = trainer.parse_config_text(
        "# a comment\n"
        "learning_rate = 0.5  # inline\n"
        "batch_size = 4\n"
        "normalize_adjacency = off\n"
        "mode = finetune\n")
    assert values == {"learning_rate": 0.5, "batch_size": 4,
                      "normalize_adjacency": False, "mode": "finetune"}


def test_config_text_rejects_unknown_keys_and_bad_values():
    with pytest.raises(ConfigError):
        trainer.parse_config_text("not_a_knob = 3\n")
    with pytest.raises(ConfigError):
        trainer.parse_config_text("batch_size = many\n")
    with pytest.raises(ConfigError):
        trainer.parse_config_text("just some words\n")


def test_load_config_layering(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("learning_rate = 0.25\nbatch_size = 4\n")
    cfg = trainer.load_config(
        path, env={"LIFEGCN_BATCH_SIZE": "6", "LIFEGCN_SEED": "9"},
        overrides={"seed": 11})
    assert cfg.learning_rate == 0.25   # file layer
    assert cfg.batch_size == 6         # env beats file
    assert cfg.seed == 11              # explicit override beats env
    based = trainer.load_config(env={}, base=presets.benchmark_config())
    assert based.learning_rate == presets.BENCHMARK_LEARNING_RATE


def test_config_validation():
    with pytest.raises(ConfigError):
        trainer.TrainConfig(mode="warmstart")
    with pytest.raises(ConfigError):
        trainer.TrainConfig(ablate="everything")
    with pytest.raises(ConfigError):
        trainer.TrainConfig(threshold=1.5)
    with pytest.raises(ConfigError):
        trainer.TrainConfig(batch_size=0)
    with pytest.raises(ConfigError):
        trainer.TrainConfig(lambda2=-1.0)


def test_record_json_round_trip(tmp_path, two_task_run):
    _, result = two_task_run
    path = tmp_path / "record.json"
    trainer.write_record_json(result.record, path)
    payload = json.loads(path.read_text())
    assert payload["examples_seen"] == result.record.examples_seen
    assert len(payload["metrics"]) == len(result.record.metric_rows)
    assert len(payload["losses"]) == len(result.record.loss_rows)
