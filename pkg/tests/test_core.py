import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pnecontrast import argmax_predict, dot_similarity, l2_normalize, softmax

bounded_vectors = arrays(
    np.float64,
    st.integers(2, 8).map(lambda n: (n,)),
    elements=st.floats(-50, 50, allow_nan=False),
)


class TestSoftmax:
    def test_symmetric_pair(self):
        np.testing.assert_array_equal(softmax([0.0, 0.0]), [0.5, 0.5])

    def test_large_gap_saturates(self):
        np.testing.assert_allclose(softmax([100.0, 0.0]), [1.0, 0.0], atol=1e-9)

    def test_direct_value(self):
        e = math.e
        np.testing.assert_allclose(
            softmax([1.0, 0.0]), [e / (1 + e), 1 / (1 + e)], rtol=1e-12
        )

    @pytest.mark.parametrize("bad", [[np.nan, 0.0], [np.inf, 1.0], [-np.inf, 1.0]])
    def test_rejects_non_finite(self, bad):
        with pytest.raises(ValueError):
            softmax(bad)

    def test_sums_to_one_batched(self, rng):
        logits = rng.normal(0, 5, size=(6, 6, 5))
        np.testing.assert_allclose(softmax(logits).sum(axis=-1), 1.0, atol=1e-12)

    @given(v=bounded_vectors, shift=st.floats(-100, 100, allow_nan=False))
    def test_shift_invariance(self, v, shift):
        np.testing.assert_allclose(softmax(v + shift), softmax(v), atol=1e-12)

    def test_order_preserving(self, rng):
        logits = rng.normal(0, 3, size=20)
        assert np.array_equal(np.argsort(softmax(logits)), np.argsort(logits))


class TestL2Normalize:
    def test_three_four_five(self):
        np.testing.assert_allclose(l2_normalize([3.0, 4.0]), [0.6, 0.8], rtol=1e-12)

    def test_unit_vector_unchanged(self):
        np.testing.assert_allclose(l2_normalize([0.0, 1.0]), [0.0, 1.0], rtol=1e-15)

    def test_axis_case(self):
        np.testing.assert_allclose(l2_normalize([2.0, 0.0, 0.0]), [1.0, 0.0, 0.0])

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            l2_normalize([0.0, 0.0, 0.0])

    @given(v=bounded_vectors)
    def test_idempotent(self, v):
        if np.linalg.norm(v) < 1e-6:
            v = v + 1.0
        once = l2_normalize(v)
        np.testing.assert_allclose(l2_normalize(once), once, atol=1e-12)
        assert abs(np.linalg.norm(once) - 1.0) < 1e-12

    def test_rows_normalized_independently(self, rng):
        m = rng.normal(size=(5, 3)) + 2.0
        norms = np.linalg.norm(l2_normalize(m), axis=-1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-12)


class TestDotSimilarity:
    def test_identical_is_one(self):
        v = l2_normalize([1.0, 2.0, 2.0])
        assert dot_similarity(v, v) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_is_zero(self):
        assert dot_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_antipodal_is_minus_one(self):
        assert dot_similarity([1.0, 0.0], [-1.0, 0.0]) == -1.0

    def test_symmetric_and_bounded(self, rng):
        for _ in range(50):
            a = l2_normalize(rng.standard_normal(6))
            b = l2_normalize(rng.standard_normal(6))
            assert dot_similarity(a, b) == dot_similarity(b, a)
            assert abs(dot_similarity(a, b)) <= 1.0 + 1e-12


class TestArgmaxPredict:
    def test_simple_pixels(self):
        scores = np.array([[[0.2, 0.8], [0.5, 0.5]], [[0.9, 0.1], [0.3, 0.7]]])
        np.testing.assert_array_equal(argmax_predict(scores), [[1, 0], [0, 1]])

    def test_three_class_pixel(self):
        assert argmax_predict(np.array([[[0.1, 0.3, 0.6]]]))[0, 0] == 2

    def test_tie_breaks_to_lowest_id(self):
        scores = np.full((1, 1, 4), 0.25)
        assert argmax_predict(scores)[0, 0] == 0

    def test_matches_raw_logit_argmax(self, rng):
        logits = rng.normal(0, 3, size=(10, 10, 5))
        preds = argmax_predict(softmax(logits))
        np.testing.assert_array_equal(preds, np.argmax(logits, axis=-1))

    def test_rejects_invalid_score_map(self):
        with pytest.raises(ValueError):
            argmax_predict(np.array([[[0.5, 0.4]]]))
