import json

import numpy as np
import pytest

from lifegcn import presets, stream
from lifegcn.errors import ConfigError, DataError

RNG = np.random.default_rng(7)


def _example(eid, labels, dim=4):
    rng = np.random.default_rng(abs(hash(eid)) % (1 << 32))
    return stream.Example(eid, rng.standard_normal(dim), labels)


def test_example_requires_labels():
    with pytest.raises(DataError):
        stream.Example("x", np.zeros(3), set())
    with pytest.raises(DataError):
        stream.Example("x", np.zeros(3), {-1})


def test_label_matrix_restricts_columns():
    examples = [_example("a", {0, 2}), _example("b", {1})]
    full = stream.label_matrix(examples, [0, 1, 2])
    np.testing.assert_array_equal(full, [[1, 0, 1], [0, 1, 0]])
    restricted = stream.label_matrix(examples, [2, 1])
    np.testing.assert_array_equal(restricted, [[1, 0], [0, 1]])


def test_split_special_and_mixed_counts():
    # Labels {a}, {a,b}, {a,c}, {c} with cells {a,b} and {c}: the first two
    # are special to task 1, the last is special to task 2, and {a,c}
    # spans both cells.
    a, b, c = 0, 1, 2
    examples = [_example("e1", {a}), _example("e2", {a, b}),
                _example("e3", {a, c}), _example("e4", {c})]
    streams, report = stream.split_dataset(examples, [{a, b}, {c}])
    assert report.special_counts == (2, 1)
    assert sum(report.mixed_counts) == 1
    assert report.assigned_total == 4
    assert not report.rejected_ids
    total = sum(len(s.train) + len(s.test) for s in streams)
    assert total == 4


def test_split_assigns_each_example_once():
    examples = [_example(f"e{i}", {int(c) for c in
                                   RNG.choice(6, size=RNG.integers(1, 4),
                                              replace=False)})
                for i in range(80)]
    streams, report = stream.split_dataset(
        examples, [{0, 1}, {2, 3}, {4, 5}])
    seen = [ex.id for s in streams for ex in s.train + s.test]
    assert len(seen) == len(set(seen)) == 80 - len(report.rejected_ids)
    assert report.assigned_total == len(seen)
    assert sum(report.special_counts) + sum(report.mixed_counts) == len(seen)


def test_split_mixed_balances_toward_smallest_task():
    # Task 1 starts with two special examples; the mixed example must go to
    # the smaller task 2 even though task 1 is also eligible.
    examples = [_example("s1", {0}), _example("s2", {1}),
                _example("m", {0, 2})]
    streams, report = stream.split_dataset(examples, [{0, 1}, {2}])
    assert report.mixed_counts == (0, 1)
    assert any(ex.id == "m" for ex in streams[1].train)


def test_split_mixed_tie_breaks_to_lowest_task_id():
    examples = [_example("m", {0, 1})]
    streams, _ = stream.split_dataset(examples, [{0}, {1}])
    assert any(ex.id == "m" for ex in streams[0].train)


def test_split_rejects_unmatched_example_with_diagnostic():
    examples = [_example("good", {0}), _example("stray", {5})]
    streams, report = stream.split_dataset(examples, [{0}, {1}])
    assert report.rejected_ids == ("stray",)
    assert report.assigned_total == 1


def test_split_rejects_overlapping_or_empty_cells():
    with pytest.raises(ConfigError):
        stream.split_dataset([_example("x", {0})], [{0, 1}, {1}])
    with pytest.raises(ConfigError):
        stream.split_dataset([_example("x", {0})], [{0}, set()])


def test_split_visible_train_labels_non_empty():
    examples = [_example(f"e{i}", {int(c) for c in
                                   RNG.choice(4, size=RNG.integers(1, 3),
                                              replace=False)})
                for i in range(40)]
    streams, _ = stream.split_dataset(examples, [{0, 1}, {2, 3}])
    for s in streams:
        for ex in s.train:
            assert s.visible_labels(ex)


def test_split_no_cross_cell_labels_means_no_mixed():
    examples = [_example("e1", {0}), _example("e2", {1}), _example("e3", {1})]
    _, report = stream.split_dataset(examples, [{0}, {1}])
    assert report.mixed_counts == (0, 0)


def test_split_test_fraction_carves_determinstically():
    examples = [_example(f"e{i}", {i % 2}) for i in range(30)]
    first, _ = stream.split_dataset(examples, [{0}, {1}],
                                    test_fraction=0.25, seed=3)
    second, _ = stream.split_dataset(examples, [{0}, {1}],
                                     test_fraction=0.25, seed=3)
    for s1, s2 in zip(first, second):
        assert [e.id for e in s1.test] == \
            [e.id for e in s2.test]
        assert len(s1.test) == round(0.25 * (len(s1.train) + len(s1.test)))


def test_partition_classes_even_split():
    cells = stream.partition_classes(12, 4)
    assert [len(c) for c in cells] == [3, 3, 3, 3]
    assert sorted(c for cell in cells for c in cell) == list(range(12))


def test_implied_conditionals_two_class_hand_value():
    # Examples seeded by class 1 pull in class 0 half the time; class 0
    # seeds pull in nothing. Equal seed weights give marginals 0.75 and
    # 0.5 and a joint of 0.25, so P(0|1) = 0.5 and P(1|0) = 1/3.
    inclusion = np.array([[0.0, 0.5], [0.0, 0.0]])
    weights = np.array([0.5, 0.5])
    implied = stream.implied_conditionals(inclusion, weights)
    assert implied[0, 1] == pytest.approx(0.5)
    assert implied[1, 0] == pytest.approx(1.0 / 3.0)
    np.testing.assert_array_equal(np.diag(implied), [1.0, 1.0])


def test_generate_synthetic_is_deterministic():
    target = presets.benchmark_target(6, 3)
    a = stream.generate_synthetic(6, 3, target, 40, 8, seed=5,
                                  test_per_task=10)
    b = stream.generate_synthetic(6, 3, target, 40, 8, seed=5,
                                  test_per_task=10)
    for s1, s2 in zip(a, b):
        assert s1.class_ids == s2.class_ids
        for e1, e2 in zip(s1.train + s1.test, s2.train + s2.test):
            assert e1.id == e2.id
            assert e1.labels == e2.labels
            np.testing.assert_array_equal(e1.features, e2.features)
    c = stream.generate_synthetic(6, 3, target, 40, 8, seed=6,
                                  test_per_task=10)
    assert any(e1.labels != e3.labels
               for e1, e3 in zip(a[0].train, c[0].train))


def test_generate_synthetic_degenerate_conditional():
    # P(a|b) = 1: every example carrying class b must also carry class a.
    target = np.array([[1.0, 1.0], [0.5, 1.0]])
    streams = stream.generate_synthetic(2, 2, target, 120, 4, seed=2)
    found_b = 0
    for s in streams:
        for ex in s.train:
            if 1 in ex.labels:
                found_b += 1
                assert 0 in ex.labels
    assert found_b > 0


def test_generate_synthetic_matches_target_conditionals():
    target = presets.benchmark_target(6, 3)
    streams = stream.generate_synthetic(6, 3, target, 2000, 8, seed=0)
    labels = stream.label_matrix(
        [ex for s in streams for ex in s.train], list(range(6)))
    counts = labels.sum(axis=0)
    pair = labels.T @ labels
    for j in range(6):
        if counts[j] < 100:
            continue
        for i in range(6):
            if i == j:
                continue
            empirical = pair[i, j] / counts[j]
            assert abs(empirical - target[i, j]) <= 0.05, (
                f"P({i}|{j}) = {empirical:.3f} vs target {target[i, j]:.3f}")


def test_generate_synthetic_rejects_infeasible_target():
    # A conditional floor of 0.4 everywhere cannot coexist with strong
    # chained inclusions under this generative family.
    bad = np.full((6, 6), 0.4)
    np.fill_diagonal(bad, 1.0)
    bad[0, 1] = bad[1, 0] = 0.95
    bad[2, 3] = bad[3, 2] = 0.02
    with pytest.raises(ConfigError):
        stream.generate_synthetic(6, 3, bad, 50, 4, seed=0)


def test_features_reflect_labels():
    target = presets.benchmark_target(4, 2)
    streams = stream.generate_synthetic(4, 2, target, 400, 16, seed=1,
                                        noise_scale=0.1)
    protos = stream.class_prototypes(4, 16, seed=1)
    for ex in streams[0].train[:50]:
        expected = protos[sorted(ex.labels)].sum(axis=0)
        err = np.linalg.norm(ex.features - expected)
        assert err < 0.1 * np.sqrt(16) * 5


def test_jsonl_round_trip(tmp_path):
    examples = [_example("e1", {0, 2}), _example("e2", {1})]
    path = tmp_path / "corpus.jsonl"
    stream.write_examples_jsonl(examples, path)
    back = stream.read_examples_jsonl(path)
    assert len(back) == 2
    for orig, loaded in zip(examples, back):
        assert loaded.id == orig.id
        assert loaded.labels == orig.labels
        np.testing.assert_allclose(loaded.features, orig.features)


def test_split_manifest_round_trip(tmp_path):
    examples = [_example("e1", {0}), _example("e2", {1}), _example("e3", {0, 1})]
    streams, report = stream.split_dataset(examples, [{0}, {1}],
                                           test_fraction=0.0)
    path = tmp_path / "manifest.json"
    stream.write_split_manifest(streams, report, path)
    payload = json.loads(path.read_text())
    assert payload["format"] == "lifegcn-split"
    rebuilt = stream.streams_from_manifest(examples, payload)
    for orig, back in zip(streams, rebuilt):
        assert orig.class_ids == back.class_ids
        assert [e.id for e in orig.train] == \
            [e.id for e in back.train]
