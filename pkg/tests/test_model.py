import numpy as np
import pytest

from pnecontrast import pixel_cross_entropy, poly_lr
from pnecontrast.model import (
    PARAM_NAMES,
    batch_cross_entropy,
    forward,
    init_params,
    sgd_update,
)
from pnecontrast.validation import rng_from


def tiny_params(rng=None, n_features=4, hidden=8, embed=4, n_classes=3):
    rng = rng or rng_from(0, "tiny")
    return init_params(n_features, hidden, embed, n_classes, rng)


class TestPolyLr:
    def test_starts_at_base(self):
        assert poly_lr(0.01, 0, 100) == 0.01

    def test_ends_at_zero(self):
        assert poly_lr(0.01, 100, 100) == 0.0

    def test_halfway_value(self):
        assert poly_lr(0.01, 50, 100) == pytest.approx(0.0053589, abs=1e-7)

    def test_monotone_nonincreasing(self):
        values = [poly_lr(0.1, it, 200) for it in range(201)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_iteration_past_total_rejected(self):
        with pytest.raises(ValueError):
            poly_lr(0.01, 101, 100)


class TestForward:
    def test_zero_heads_give_uniform_scores(self):
        params = tiny_params()
        for name in ("w_feat", "b_feat", "w_seg", "b_seg", "w_proj1", "b_proj1", "w_proj2"):
            params[name] = np.zeros_like(params[name])
        params["b_proj2"] = np.ones_like(params["b_proj2"])  # keep norms nonzero
        state = forward(params, np.ones((5, 4)))
        np.testing.assert_allclose(state.scores, 1.0 / 3.0, atol=1e-15)

    def test_zero_projection_rejected(self):
        params = tiny_params()
        params["w_proj2"] = np.zeros_like(params["w_proj2"])
        params["b_proj2"] = np.zeros_like(params["b_proj2"])
        with pytest.raises(ValueError):
            forward(params, np.ones((2, 4)))

    def test_single_pixel_matches_batch_row(self):
        params = tiny_params()
        rng = rng_from(1)
        x = rng.normal(size=(7, 4))
        full = forward(params, x)
        one = forward(params, x[3:4])
        # BLAS may pick different kernels per shape, so allow last-ulp drift
        np.testing.assert_allclose(one.scores[0], full.scores[3], rtol=0, atol=1e-12)
        np.testing.assert_allclose(one.embeddings[0], full.embeddings[3], rtol=0, atol=1e-12)

    def test_outputs_finite_and_unit_norm(self):
        params = tiny_params()
        x = rng_from(2).normal(size=(50, 4)) * 3
        state = forward(params, x)
        assert np.all(np.isfinite(state.logits))
        assert np.all(np.isfinite(state.embeddings))
        np.testing.assert_allclose(
            np.linalg.norm(state.embeddings, axis=1), 1.0, atol=1e-12
        )

    def test_feature_dim_mismatch_rejected(self):
        with pytest.raises(ValueError):
            forward(tiny_params(), np.ones((2, 5)))


class TestBatchCrossEntropy:
    def test_matches_per_pixel_form(self):
        rng = rng_from(3)
        logits = rng.normal(size=(12, 4))
        labels = rng.integers(0, 4, size=12)
        value, grad = batch_cross_entropy(logits, labels)
        singles = [pixel_cross_entropy(logits[i], int(labels[i])) for i in range(12)]
        assert value == pytest.approx(np.mean([s.value for s in singles]), abs=1e-12)
        stacked = np.stack([s.grad_logits for s in singles]) / 12
        np.testing.assert_allclose(grad, stacked, atol=1e-12)


class TestSgdUpdate:
    def test_zero_gradients_leave_only_weight_decay(self):
        params = tiny_params()
        before = {k: v.copy() for k, v in params.items()}
        grads = {k: np.zeros_like(v) for k, v in params.items()}
        buffers = {k: np.zeros_like(v) for k, v in params.items()}
        sgd_update(params, grads, buffers, lr=0.1, momentum=0.9, weight_decay=0.01)
        for name in PARAM_NAMES:
            np.testing.assert_allclose(params[name], before[name] * (1 - 0.1 * 0.01), rtol=1e-12)

    def test_momentum_accumulates(self):
        params = {"w": np.array([1.0])}
        grads = {"w": np.array([1.0])}
        buffers = {"w": np.array([0.0])}
        sgd_update(params, grads, buffers, lr=0.1, momentum=0.5, weight_decay=0.0)
        assert params["w"][0] == pytest.approx(0.9)
        sgd_update(params, grads, buffers, lr=0.1, momentum=0.5, weight_decay=0.0)
        # buffer: 1.0 then 0.5 * 1.0 + 1.0 = 1.5
        assert params["w"][0] == pytest.approx(0.9 - 0.15)
