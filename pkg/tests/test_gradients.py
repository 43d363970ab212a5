import numpy as np
import pytest

from pnecontrast import (
    balance_diagnostic,
    finite_diff_check,
    grad_ce,
    nce_loss,
    pne_group_loss,
    pne_loss,
    run_gradient_suite,
)
from pnecontrast.gradcheck import (
    _contrast_adapter,
    random_contrast_instance,
    vectors_with_sims,
)
from pnecontrast.validation import rng_from


class TestHandValues:
    def test_pne_symmetric_case(self):
        # pos sim 0.5, neg sim 0.5, tau 1: dL/ds+ = -1/2, dL/ds- = +1/2
        anchor, vecs = vectors_with_sims([0.5, 0.5])
        res = pne_loss(anchor, vecs[:1], vecs[1:], 1.0)
        assert res.grad_pos_sims[0] == pytest.approx(-0.5, abs=1e-12)
        assert res.grad_neg_sims[0] == pytest.approx(0.5, abs=1e-12)

    def test_nce_symmetric_case(self):
        anchor, vecs = vectors_with_sims([0.0, 0.0])
        res = nce_loss(anchor, vecs[:1], vecs[1:], 1.0)
        assert res.grad_pos_sims[0] == pytest.approx(-0.5, abs=1e-12)
        assert res.grad_neg_sims[0] == pytest.approx(0.5, abs=1e-12)

    def test_no_negatives_zero_gradients(self):
        anchor, vecs = vectors_with_sims([0.3, -0.2])
        res = pne_loss(anchor, vecs, [], 1.0)
        assert np.all(res.grad_anchor == 0)
        assert np.all(res.grad_positives == 0)

    def test_ce_symmetric(self):
        np.testing.assert_allclose(grad_ce([0.0, 0.0], 0), [-0.5, 0.5], atol=1e-12)

    def test_ce_confident_correct(self):
        np.testing.assert_allclose(grad_ce([100.0, 0.0], 0), [0.0, 0.0], atol=1e-9)

    def test_ce_direct(self):
        e = np.e
        np.testing.assert_allclose(
            grad_ce([1.0, 0.0], 1), [e / (1 + e), -e / (1 + e)], rtol=1e-12
        )


class TestFiniteDifferences:
    @pytest.mark.parametrize("kind", ["nce", "pne", "pne_weighted"])
    def test_contrast_losses_match(self, kind):
        for trial in range(10):
            rng = rng_from(99, kind, trial)
            instance, tau, scores = random_contrast_instance(rng)
            fn = _contrast_adapter(kind, tau, scores if kind == "pne_weighted" else None)
            report = finite_diff_check(fn, instance)
            assert report.max_rel_error < 1e-6, (kind, trial, report.per_param)

    def test_constant_loss_has_zero_error(self):
        anchor, vecs = vectors_with_sims([0.1, 0.2])
        instance = {"anchor": anchor, "positives": vecs, "negatives": np.empty((0, 3))}
        fn = _contrast_adapter("pne", 1.0)
        report = finite_diff_check(fn, instance)
        assert report.max_rel_error == 0.0

    def test_error_shrinks_quadratically(self):
        rng = rng_from(4, "order")
        instance, _, _ = random_contrast_instance(rng)
        fn = _contrast_adapter("pne", 0.3)
        errors = [finite_diff_check(fn, instance, h=h).max_rel_error for h in (1e-2, 1e-3, 1e-4)]
        assert errors[0] > errors[1] > errors[2]
        for big, small in zip(errors, errors[1:]):
            # central differences: one decade in h is about two decades in error
            assert 20 < big / small < 500

    def test_much_smaller_at_small_step(self):
        rng = rng_from(5, "order")
        instance, _, _ = random_contrast_instance(rng)
        fn = _contrast_adapter("pne", 0.3)
        coarse = finite_diff_check(fn, instance, h=1e-2).max_rel_error
        fine = finite_diff_check(fn, instance, h=1e-5).max_rel_error
        assert fine < coarse * 1e-3

    def test_suite_runs_and_passes(self):
        suite = run_gradient_suite(trials=5, seed=21)
        assert suite["passed"]
        assert set(suite["losses"]) == {"nce", "pne", "pne_weighted", "ce"}
        assert suite["max_rel_error"] < 1e-6

    def test_non_finite_loss_reported_not_thrown(self):
        def exploding(inst):
            return float("nan"), {"x": np.zeros_like(inst["x"])}

        report = finite_diff_check(exploding, {"x": np.ones(3)})
        assert not report.all_finite
        assert report.max_rel_error == float("inf")


class TestGradientIdentities:
    def test_similarity_gradient_balance(self):
        for trial in range(25):
            rng = rng_from(7, "balance", trial)
            instance, tau, scores = random_contrast_instance(rng)
            for kind, extra in (("nce", None), ("pne", None), ("pne_weighted", scores)):
                if kind == "nce":
                    res = nce_loss(instance["anchor"], instance["positives"],
                                   instance["negatives"], tau)
                else:
                    res = pne_group_loss(instance["anchor"], instance["positives"],
                                         instance["negatives"], tau, extra)
                assert res.pos_sim_grad_sum == pytest.approx(-res.neg_sim_grad_sum, abs=1e-12)

    def test_pair_embedding_gradients_cancel(self):
        # with dot-product similarities all pair gradients point along the
        # anchor, so the balance identity makes their embedding-space sum
        # vanish while the anchor gradient itself stays nonzero
        rng = rng_from(8, "cancel")
        instance, tau, _ = random_contrast_instance(rng)
        res = pne_loss(instance["anchor"], instance["positives"], instance["negatives"], tau)
        total = res.grad_positives.sum(axis=0) + res.grad_negatives.sum(axis=0)
        np.testing.assert_allclose(total, 0.0, atol=1e-12)
        assert np.linalg.norm(res.grad_anchor) > 0

    def test_anchor_gradient_chain_consistency(self):
        rng = rng_from(9, "chain")
        instance, tau, _ = random_contrast_instance(rng)
        res = pne_loss(instance["anchor"], instance["positives"], instance["negatives"], tau)
        rebuilt = (
            res.grad_pos_sims @ instance["positives"]
            + res.grad_neg_sims @ instance["negatives"]
        )
        np.testing.assert_allclose(res.grad_anchor, rebuilt, atol=1e-14)


class TestBalanceDiagnostic:
    def test_nce_curve_is_log_one_plus_m(self):
        anchor, vecs = vectors_with_sims([0.0, 0.0])
        report = balance_diagnostic("nce", anchor, vecs[:1], vecs[1:], 1.0)
        for m, value in report.loss_by_multiplier.items():
            assert value == np.log(1.0 + m)

    def test_pne_joint_replication_invariant(self):
        rng = rng_from(10, "joint")
        instance, tau, _ = random_contrast_instance(rng)
        base = pne_loss(instance["anchor"], instance["positives"],
                        instance["negatives"], tau).value
        for m in (1, 2, 4, 8):
            rep = pne_loss(
                instance["anchor"],
                np.tile(instance["positives"], (m, 1)),
                np.tile(instance["negatives"], (m, 1)),
                tau,
            ).value
            assert abs(rep - base) <= 1e-12

    def test_report_fields_finite(self):
        rng = rng_from(11, "fields")
        instance, tau, scores = random_contrast_instance(rng)
        report = balance_diagnostic(
            "pne", instance["anchor"], instance["positives"], instance["negatives"],
            tau, positive_scores=scores,
        )
        assert np.isfinite(report.pos_sim_grad_sum)
        assert np.isfinite(report.neg_sim_grad_sum)
        assert all(np.isfinite(v) for v in report.loss_by_multiplier.values())
        assert sorted(report.loss_by_multiplier) == [1, 2, 4, 8]

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            balance_diagnostic("huh", [1, 0], [[1, 0]], [[0, 1]])
