import numpy as np
import pytest

from pnecontrast import (
    SamplingConfig,
    build_sample_sets,
    cap_anchors,
    draw_samples,
    partition_pixels,
)
from pnecontrast.validation import rng_from

from conftest import random_maps


class TestPartitionPixels:
    def test_forced_two_by_two(self):
        labels = np.array([[0, 0], [1, 1]])
        preds = np.array([[0, 1], [1, 1]])
        part = partition_pixels(labels, preds)
        np.testing.assert_array_equal(part.correct[0], [0])
        np.testing.assert_array_equal(part.correct[1], [2, 3])
        assert set(part.anchor_groups) == {(1, 0)}
        np.testing.assert_array_equal(part.anchor_groups[(1, 0)], [1])

    def test_perfect_prediction_has_no_groups(self):
        labels = np.array([[0, 1], [2, 0]])
        part = partition_pixels(labels, labels.copy())
        assert part.anchor_groups == {}
        assert sum(len(v) for v in part.correct.values()) == 4

    def test_uniform_mislabel_single_group(self):
        labels = np.zeros((3, 3), dtype=np.int64)
        preds = np.ones((3, 3), dtype=np.int64)
        part = partition_pixels(labels, preds)
        assert set(part.anchor_groups) == {(1, 0)}
        assert len(part.anchor_groups[(1, 0)]) == 9

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            partition_pixels(np.zeros((2, 2), dtype=int), np.zeros((3, 2), dtype=int))

    def test_partition_is_exhaustive_and_consistent(self, rng):
        for trial in range(25):
            h, w = int(rng.integers(1, 65)), int(rng.integers(1, 65))
            n_classes = int(rng.integers(2, 7))
            labels = rng.integers(0, n_classes, size=(h, w))
            preds = rng.integers(0, n_classes, size=(h, w))
            part = partition_pixels(labels, preds, n_classes)

            seen = []
            for c, ids in part.correct.items():
                seen.append(ids)
                assert np.all(labels.ravel()[ids] == c)
                assert np.all(preds.ravel()[ids] == c)
            for (pl, lk), ids in part.anchor_groups.items():
                assert pl != lk
                seen.append(ids)
                assert np.all(preds.ravel()[ids] == pl)
                assert np.all(labels.ravel()[ids] == lk)
            all_ids = np.concatenate(seen)
            assert all_ids.size == h * w
            assert np.array_equal(np.sort(all_ids), np.arange(h * w))


class TestCapAnchors:
    def _partition_with_anchors(self, rng, total, n_classes=5):
        side = int(np.ceil(np.sqrt(total)))
        labels = rng.integers(0, n_classes, size=(side, side))
        preds = (labels + rng.integers(1, n_classes, size=labels.shape)) % n_classes
        part = partition_pixels(labels, preds, n_classes)
        assert part.total_anchors() == side * side
        return part

    def test_under_cap_unchanged(self, rng):
        labels, preds, _ = random_maps(rng, 10, 10, 3)
        part = partition_pixels(labels, preds, 3)
        capped = cap_anchors(part, SamplingConfig(anchor_cap=200), rng_from(0))
        assert capped.total_anchors() == part.total_anchors()
        for key, ids in part.anchor_groups.items():
            np.testing.assert_array_equal(capped.anchor_groups[key], ids)

    def test_exact_cap_when_over(self, rng):
        part = self._partition_with_anchors(rng, 500)
        capped = cap_anchors(part, SamplingConfig(anchor_cap=200), rng_from(7))
        assert capped.total_anchors() == 200

    def test_groups_never_gain_pixels(self, rng):
        part = self._partition_with_anchors(rng, 400)
        capped = cap_anchors(part, SamplingConfig(anchor_cap=150), rng_from(3))
        for key, ids in capped.anchor_groups.items():
            original = part.anchor_groups[key]
            assert len(ids) <= len(original)
            assert np.isin(ids, original).all()

    def test_deterministic_under_seed(self, rng):
        part = self._partition_with_anchors(rng, 600)
        a = cap_anchors(part, SamplingConfig(anchor_cap=200), rng_from(11))
        b = cap_anchors(part, SamplingConfig(anchor_cap=200), rng_from(11))
        assert set(a.anchor_groups) == set(b.anchor_groups)
        for key in a.anchor_groups:
            np.testing.assert_array_equal(a.anchor_groups[key], b.anchor_groups[key])


class TestDrawSamples:
    def test_min_rule(self):
        # 10 correct positives for class 0, 3 correct negatives for class 1
        labels = np.array([[0] * 10 + [1] * 3 + [0]])
        preds = np.array([[0] * 10 + [1] * 3 + [1]])
        scores = np.full((1, 14, 3), 1.0 / 3.0)
        part = partition_pixels(labels, preds, 3)
        sets = draw_samples(
            part, (1, 0), scores, SamplingConfig(pairs_per_group=64), rng_from(0)
        )
        assert sets.n_pairs == 3
        assert len(sets.positives) == len(sets.negatives) == 3

    def test_empty_pool_yields_skip_marker(self):
        labels = np.array([[0, 1]])
        preds = np.array([[1, 0]])  # nothing correctly classified
        scores = np.full((1, 2, 2), 0.5)
        part = partition_pixels(labels, preds, 2)
        sets = draw_samples(part, (1, 0), scores, SamplingConfig(), rng_from(0))
        assert sets.skipped
        assert sets.positives.size == 0 and sets.negatives.size == 0
        np.testing.assert_array_equal(sets.anchors, part.anchor_groups[(1, 0)])

    def test_deterministic_under_seed(self, rng):
        labels, preds, scores = random_maps(rng, 16, 16, 4)
        part = partition_pixels(labels, preds, 4)
        key = sorted(part.anchor_groups)[0]
        a = draw_samples(part, key, scores, SamplingConfig(), rng_from(5))
        b = draw_samples(part, key, scores, SamplingConfig(), rng_from(5))
        np.testing.assert_array_equal(a.positives, b.positives)
        np.testing.assert_array_equal(a.negatives, b.negatives)
        np.testing.assert_array_equal(a.positive_scores, b.positive_scores)


class TestBuildSampleSets:
    def test_contracts_on_random_maps(self, rng):
        config = SamplingConfig(anchor_cap=200, pairs_per_group=64)
        for trial in range(50):
            n_classes = int(rng.integers(3, 7))
            labels, preds, scores = random_maps(rng, 24, 24, n_classes)
            partition, sets = build_sample_sets(
                labels, preds, scores, config, seed_key=("t", trial)
            )
            assert partition.total_anchors() <= 200
            flat_labels, flat_preds = labels.ravel(), preds.ravel()
            for (pl, lk), ss in sets.items():
                assert len(ss.positives) == len(ss.negatives)
                if ss.skipped:
                    continue
                assert np.all(flat_labels[ss.positives] == lk)
                assert np.all(flat_preds[ss.positives] == lk)
                assert np.all(flat_labels[ss.negatives] == pl)
                assert np.all(flat_preds[ss.negatives] == pl)
                assert not np.intersect1d(ss.positives, ss.negatives).size
                assert not np.intersect1d(ss.anchors, ss.positives).size
                assert not np.intersect1d(ss.anchors, ss.negatives).size
                assert np.all(ss.positive_scores > 0)
                assert np.all(ss.positive_scores <= 1)

    def test_group_draws_are_order_independent(self, rng):
        labels, preds, scores = random_maps(rng, 20, 20, 4)
        config = SamplingConfig()
        _, sets_a = build_sample_sets(labels, preds, scores, config, seed_key=(9,))
        _, sets_b = build_sample_sets(labels, preds, scores, config, seed_key=(9,))
        assert set(sets_a) == set(sets_b)
        for key in sets_a:
            np.testing.assert_array_equal(sets_a[key].positives, sets_b[key].positives)
            np.testing.assert_array_equal(sets_a[key].negatives, sets_b[key].negatives)


class TestSamplingConfig:
    @pytest.mark.parametrize("kwargs", [{"anchor_cap": 0}, {"pairs_per_group": 0}, {"seed": -1}])
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            SamplingConfig(**kwargs)
