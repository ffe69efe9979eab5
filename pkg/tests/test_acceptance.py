"""End-to-end acceptance checks.

Eight numbered criteria, one test each, so `pytest -v` shows one pass/fail
line per criterion. The two directional criteria share one grid of
benchmark runs (five seeds, four training configurations) built once per
session; its wall time is charged against both runtime budgets.
"""

import math
import time

import numpy as np
import pytest

from lifegcn import (backbone, correlation, graph, losses, metrics,
                     numerics, presets, stream, trainer)

SEEDS = (0, 1, 2, 3, 4)
GRID_CONFIGS = (
    ("agcn", "none"),
    ("agcn", "intra-only"),
    ("finetune", "none"),
    ("distill-only", "none"),
)


@pytest.fixture(scope="module")
def benchmark_grid():
    t0 = time.monotonic()
    runs = {}
    for seed in SEEDS:
        streams = presets.benchmark_streams(seed=seed)
        for mode, ablate in GRID_CONFIGS:
            cfg = presets.benchmark_config(seed=seed, mode=mode,
                                           ablate=ablate)
            result = trainer.run(streams, cfg)
            runs[(seed, mode, ablate)] = result
    elapsed = time.monotonic() - t0
    train_total = (presets.BENCHMARK_TASKS
                   * presets.BENCHMARK_TRAIN_PER_TASK)
    return {"runs": runs, "elapsed": elapsed, "train_total": train_total}


def _grid_mean(grid, mode, ablate, kind):
    values = [grid["runs"][(s, mode, ablate)].record
              .final_summary[kind]["mAP"] for s in SEEDS]
    return float(np.mean(values))


def test_criterion_1_streaming_counts_match_replay_oracle():
    start = time.monotonic()
    rng = np.random.default_rng(2024)
    for trial in range(50):
        n_new = int(rng.integers(1, 9))
        n_old = int(rng.integers(0, 5))
        n = int(rng.integers(1, 501))
        density = 0.1 + 0.6 * rng.random()
        hard = (rng.random((n, n_new)) < density).astype(np.float64)
        soft = rng.random((n, n_old)) if n_old else None

        stats = correlation.LabelStats(n_new, n_old)
        batch = int(rng.integers(1, 64))
        for lo in range(0, n, batch):
            sl = slice(lo, lo + batch)
            correlation.observe_batch(stats, hard[sl],
                                      None if soft is None else soft[sl])

        counts = hard.sum(axis=0)
        one_shot = np.zeros((n_new, n_new))
        np.divide(hard.T @ hard, counts[np.newaxis, :], out=one_shot,
                  where=counts[np.newaxis, :] > 0)
        np.fill_diagonal(one_shot, 1.0)
        np.testing.assert_array_equal(correlation.new_new_block(stats),
                                      one_shot)

        if n_old:
            r_block = correlation.old_new_block(stats)
            q_block = correlation.new_old_block(stats, r_block)
            # Q_ji * sum(z_i) == R_ij * N_j wherever the flip was not
            # clipped at 1; clipped entries must sit exactly at 1.
            lhs = q_block.T * stats.soft_sum[:, np.newaxis]
            rhs = r_block * counts[np.newaxis, :]
            free = q_block.T < 1.0
            np.testing.assert_allclose(lhs[free], rhs[free],
                                       rtol=1e-12, atol=1e-12)
            assert np.all(q_block.T[~free] == 1.0)
    elapsed = time.monotonic() - start
    assert elapsed < 10.0, f"replay oracle took {elapsed:.1f}s"
    print(f"criterion 1 (streaming counts vs replay oracle): "
          f"PASS in {elapsed:.1f}s")


def test_criterion_2_gradient_suite():
    start = time.monotonic()
    rng = np.random.default_rng(4096)
    worst = 0.0

    def track(err):
        nonlocal worst
        worst = max(worst, err)
        assert err < 1e-4

    for _ in range(20):
        head = graph.GraphHead.init(embed_dim=4, hidden_dim=4, out_dim=3,
                                    seed=int(rng.integers(1 << 30)))
        adjacency = rng.random((5, 5))
        nodes = rng.standard_normal((5, 4))
        upstream = rng.standard_normal((5, 3))
        _, cache = head.forward_cached(adjacency, nodes)
        grads = head.backward(cache, upstream)
        track(numerics.finite_diff_check(
            lambda w: float(np.sum(graph.GraphHead(w, head.w2)
                                   .forward(adjacency, nodes) * upstream)),
            head.w1, grads["w1"], h=1e-6))
        track(numerics.finite_diff_check(
            lambda w: float(np.sum(graph.GraphHead(head.w1, w)
                                   .forward(adjacency, nodes) * upstream)),
            head.w2, grads["w2"], h=1e-6))

    for _ in range(20):
        net = backbone.Backbone.init(in_dim=4, hidden=3, out_dim=3,
                                     seed=int(rng.integers(1 << 30)))
        x = rng.standard_normal((6, 4))
        upstream = rng.standard_normal((6, 3))
        _, cache = net.extract_cached(x)
        grads = net.backward(cache, upstream)
        for name in ("w1", "b1", "w2", "b2"):
            def f(p, _name=name):
                parts = {"w1": net.w1, "b1": net.b1,
                         "w2": net.w2, "b2": net.b2, _name: p}
                probe = backbone.Backbone(parts["w1"], parts["b1"],
                                          parts["w2"], parts["b2"])
                return float(np.sum(probe.extract(x) * upstream))
            track(numerics.finite_diff_check(f, getattr(net, name),
                                             grads[name], h=1e-6))

    for _ in range(20):
        y = (rng.random((4, 5)) < 0.4).astype(np.float64)
        prob = 0.05 + 0.9 * rng.random((4, 5))
        _, grad = losses.cls_loss(y, prob)
        track(numerics.finite_diff_check(
            lambda p: losses.cls_loss(y, p)[0], prob, grad, h=1e-6))

        soft = rng.random((4, 5))
        _, grad = losses.dst_loss(soft, prob)
        track(numerics.finite_diff_check(
            lambda p: losses.dst_loss(soft, p)[0], prob, grad, h=1e-6))

        prev = rng.standard_normal((3, 4))
        cur = rng.standard_normal((5, 4))
        _, grad = losses.gph_loss(prev, cur)
        track(numerics.finite_diff_check(
            lambda c: losses.gph_loss(prev, c)[0], cur, grad, h=1e-6))

    for _ in range(20):
        w = losses.LossWeights(0.3, 0.6, 1.2)
        y = (rng.random((3, 2)) < 0.5).astype(np.float64)
        soft = rng.random((3, 3))
        prob = 0.05 + 0.9 * rng.random((3, 5))
        prev = rng.standard_normal((3, 4))
        cur = rng.standard_normal((5, 4))
        parts = losses.total_loss(w, y, prob, soft, prev, cur, 2)
        track(numerics.finite_diff_check(
            lambda p: losses.total_loss(w, y, p, soft, prev, cur, 2).total,
            prob, parts.grad_yhat, h=1e-6))
        track(numerics.finite_diff_check(
            lambda c: losses.total_loss(w, y, prob, soft, prev, c, 2).total,
            cur, parts.grad_node, h=1e-6))

    elapsed = time.monotonic() - start
    assert elapsed < 30.0, f"gradient suite took {elapsed:.1f}s"
    print(f"criterion 2 (finite-difference gradient suite): PASS, "
          f"max rel err {worst:.2e}, {elapsed:.1f}s")


def test_criterion_3_hand_values():
    cls_value, _ = losses.cls_loss([1.0, 0.0], [0.5, 0.5])
    assert abs(cls_value - 2.0 * math.log(2.0)) < 1e-9

    dst_value, _ = losses.dst_loss([0.5], [0.5])
    assert abs(dst_value - math.log(2.0)) < 1e-9

    gph_value, _ = losses.gph_loss([[1.0, 2.0]], [[4.0, 6.0]])
    assert gph_value == 25.0

    head = graph.GraphHead(np.array([[2.0]]), np.array([[3.0]]))
    assert head.forward(np.array([[1.0]]), np.array([[1.0]]))[0, 0] == 6.0

    scores = np.array([[0.9, 0.1], [0.8, 0.2]])
    truth = np.array([[1, 1], [1, 0]])
    report = metrics.prf_metrics(metrics.EvalBatch(scores, truth))
    assert report.op == 1.0
    assert report.or_ == 2.0 / 3.0
    assert report.of1 == pytest.approx(0.8, abs=1e-15)
    assert report.cp == 0.5 and report.cr == 0.5 and report.cf1 == 0.5

    ap = metrics.average_precision(np.array([0.9, 0.8, 0.7]),
                                   np.array([1, 0, 1]))
    assert abs(ap - 5.0 / 6.0) < 1e-12

    assert metrics.forgetting({(1, 1): 0.8, (2, 1): 0.5}, 2) == \
        pytest.approx(0.3, abs=1e-15)
    print("criterion 3 (hand-computed reference values): PASS")


def test_criterion_4_expert_contract():
    target = presets.benchmark_target(4, 2)
    streams = stream.generate_synthetic(4, 2, target, 80, 8, seed=11,
                                        test_per_task=20)
    cfg = trainer.TrainConfig(input_dim=8, backbone_hidden=8, feature_dim=8,
                              embed_dim=8, graph_hidden=8, batch_size=10,
                              learning_rate=0.05, lambda3=1.0, seed=11)
    result = trainer.run(streams, cfg)
    snap = result.expert
    assert snap is not None and snap.task_index == 2

    # Same frozen inputs: the live propagation output must match the
    # snapshot's cache, making the drift penalty exactly zero.
    corr = result.corr_history[-1]
    live_repr = result.graph.forward(corr.graph_view(cfg.normalize_adjacency),
                                     result.embeddings.matrix)
    value, _ = losses.gph_loss(snap.node_repr, live_repr)
    assert value == 0.0

    feats = stream.feature_matrix(streams[0].test + streams[1].test)
    live_scores, _ = trainer.predict(feats, result.backbone, result.graph,
                                     corr, result.embeddings.matrix,
                                     cfg.threshold, cfg.normalize_adjacency)
    expert_scores = snap.soft_labels(feats)
    assert np.array_equal(live_scores, expert_scores)
    print("criterion 4 (expert snapshot contract): PASS")


def test_criterion_5_directional_gains_over_finetuning(benchmark_grid):
    full = _grid_mean(benchmark_grid, "agcn", "none", "final")
    ft = _grid_mean(benchmark_grid, "finetune", "none", "final")
    distill = _grid_mean(benchmark_grid, "distill-only", "none", "final")
    full_fg = _grid_mean(benchmark_grid, "agcn", "none", "forgetting")
    ft_fg = _grid_mean(benchmark_grid, "finetune", "none", "forgetting")

    assert full > ft, (f"mean final mAP: full {full:.4f} vs "
                       f"fine-tuning {ft:.4f}")
    assert full_fg < ft_fg, (f"forgetting: full {full_fg:+.4f} vs "
                             f"fine-tuning {ft_fg:+.4f}")
    assert distill <= full, (f"distill-only {distill:.4f} vs full "
                             f"{full:.4f}")
    assert benchmark_grid["elapsed"] < 300.0
    print(f"criterion 5 (directional gains over fine-tuning): PASS "
          f"[full {full:.4f} > ft {ft:.4f}; forgetting {full_fg:+.4f} < "
          f"{ft_fg:+.4f}; distill-only {distill:.4f} <= full; grid "
          f"{benchmark_grid['elapsed']:.0f}s]")


def test_criterion_6_cross_task_blocks_help(benchmark_grid):
    full = _grid_mean(benchmark_grid, "agcn", "none", "final")
    intra = _grid_mean(benchmark_grid, "agcn", "intra-only", "final")
    assert intra <= full, (f"intra-only {intra:.4f} vs full {full:.4f}")
    assert benchmark_grid["elapsed"] < 300.0
    print(f"criterion 6 (cross-task correlation blocks help): PASS "
          f"[intra-only {intra:.4f} <= full {full:.4f}]")


def test_criterion_7_single_pass_contract(benchmark_grid):
    expected = benchmark_grid["train_total"]
    for key, result in benchmark_grid["runs"].items():
        assert result.record.examples_seen == expected, key
        steps = {}
        for row in result.record.loss_rows:
            steps.setdefault(row["task"], 0)
            steps[row["task"]] += 1
        batches = math.ceil(presets.BENCHMARK_TRAIN_PER_TASK
                            / presets.BENCHMARK_BATCH_SIZE)
        assert all(count == batches for count in steps.values()), key
    print(f"criterion 7 (single-pass contract): PASS "
          f"[{expected} examples seen exactly once in "
          f"{len(benchmark_grid['runs'])} runs]")


def test_criterion_8_deterministic_records():
    streams = presets.benchmark_streams(seed=0)
    first = trainer.run(streams, presets.benchmark_config(seed=0))
    second = trainer.run(streams, presets.benchmark_config(seed=0))
    assert first.record.metrics_csv_text() == \
        second.record.metrics_csv_text()
    assert first.record.losses_csv_text() == second.record.losses_csv_text()
    print("criterion 8 (byte-identical records across reruns): PASS")
