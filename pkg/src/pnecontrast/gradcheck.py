"""Finite-difference gradient validation and balance diagnostics.

The checker perturbs raw input vectors without renormalizing, so it tests
exactly the differentiated function, not the normalization that produced
the inputs. Relative errors are measured per parameter array with
Euclidean magnitudes: ``|analytic - numeric| / max(|analytic|, |numeric|,
1e-12)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import l2_normalize
from .losses import nce_loss, pixel_cross_entropy, pne_group_loss, pne_loss
from .validation import rng_from

CHECK_DIMS = (2, 8, 32)
CHECK_SET_SIZES = (1, 5, 64)
CHECK_TEMPERATURES = (0.3, 1.0, 5.0)
DEFAULT_STEP = 1e-5
GRAD_TOLERANCE = 1e-6


@dataclass
class GradCheckReport:
    """Outcome of comparing analytic gradients against central differences."""

    max_rel_error: float
    per_param: dict[str, float]
    step: float
    n_instances: int
    all_finite: bool = True

    def to_dict(self) -> dict:
        return {
            "max_rel_error": self.max_rel_error,
            "per_param": dict(self.per_param),
            "step": self.step,
            "n_instances": self.n_instances,
            "all_finite": self.all_finite,
        }


@dataclass
class BalanceReport:
    """Similarity-gradient sums and the loss's negative-count response."""

    pos_sim_grad_sum: float
    neg_sim_grad_sum: float
    loss_by_multiplier: dict[int, float] = field(default_factory=dict)


def grad_nce(anchor, positives, negatives, temperature: float = 1.0) -> dict:
    """Embedding and similarity gradients of the per-positive softmax loss."""
    res = nce_loss(anchor, positives, negatives, temperature)
    return {
        "anchor": res.grad_anchor,
        "positives": res.grad_positives,
        "negatives": res.grad_negatives,
        "pos_sims": res.grad_pos_sims,
        "neg_sims": res.grad_neg_sims,
    }


def grad_pne(
    anchor, positives, negatives, temperature: float = 1.0, positive_scores=None
) -> dict:
    """Embedding and similarity gradients of the ratio-form loss."""
    res = pne_group_loss(anchor, positives, negatives, temperature, positive_scores)
    return {
        "anchor": res.grad_anchor,
        "positives": res.grad_positives,
        "negatives": res.grad_negatives,
        "pos_sims": res.grad_pos_sims,
        "neg_sims": res.grad_neg_sims,
    }


def grad_ce(logits, true_class: int) -> np.ndarray:
    """Cross-entropy gradient: softmax(logits) minus the one-hot target."""
    return pixel_cross_entropy(logits, true_class).grad_logits


def finite_diff_gradients(value_fn, instance: dict, h: float = DEFAULT_STEP) -> dict:
    """Central-difference gradients of ``value_fn`` over every array entry.

    Non-finite perturbed values surface as NaN coordinates rather than an
    exception.
    """
    if h <= 0:
        raise ValueError(f"step size must be positive, got {h}")
    work = {name: np.array(arr, dtype=np.float64) for name, arr in instance.items()}
    numeric = {}
    for name, arr in work.items():
        grad = np.zeros_like(arr)
        flat = arr.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = value_fn(work)
            flat[i] = orig - h
            down = value_fn(work)
            flat[i] = orig
            if np.isfinite(up) and np.isfinite(down):
                grad.reshape(-1)[i] = (up - down) / (2.0 * h)
            else:
                grad.reshape(-1)[i] = np.nan
        numeric[name] = grad
    return numeric


def _rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    if not np.all(np.isfinite(numeric)):
        return float("inf")
    diff = float(np.linalg.norm(analytic - numeric))
    scale = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)), 1e-12)
    return diff / scale


def finite_diff_check(loss_fn, instance: dict, h: float = DEFAULT_STEP) -> GradCheckReport:
    """Compare a loss's analytic gradients against central differences.

    ``loss_fn(instance)`` must return ``(value, grads)`` where grads maps the
    instance's keys to arrays of matching shape.
    """
    _, analytic = loss_fn(instance)
    numeric = finite_diff_gradients(lambda inst: loss_fn(inst)[0], instance, h)
    per_param = {name: _rel_error(analytic[name], numeric[name]) for name in instance}
    finite = all(np.isfinite(e) for e in per_param.values())
    worst = max(per_param.values()) if per_param else 0.0
    return GradCheckReport(
        max_rel_error=float(worst),
        per_param=per_param,
        step=h,
        n_instances=1,
        all_finite=finite,
    )


def unit_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    """n random unit vectors of the given dimension."""
    return l2_normalize(rng.standard_normal((n, dim)))


def vectors_with_sims(sims) -> tuple[np.ndarray, np.ndarray]:
    """Build an anchor plus unit vectors realizing prescribed similarities.

    Vector i is ``s_i * e_0 + sqrt(1 - s_i^2) * e_{i+1}``, so its dot product
    with the anchor ``e_0`` is exactly ``s_i``.
    """
    sims = np.asarray(sims, dtype=np.float64)
    dim = sims.size + 1
    anchor = np.zeros(dim)
    anchor[0] = 1.0
    vecs = np.zeros((sims.size, dim))
    vecs[:, 0] = sims
    vecs[np.arange(sims.size), np.arange(sims.size) + 1] = np.sqrt(1.0 - sims**2)
    return anchor, vecs


def random_contrast_instance(rng: np.random.Generator) -> tuple[dict, float, np.ndarray]:
    """Random (anchor, positives, negatives) instance plus tau and raw scores."""
    dim = int(rng.choice(CHECK_DIMS))
    n_pos = int(rng.choice(CHECK_SET_SIZES))
    n_neg = int(rng.choice(CHECK_SET_SIZES))
    tau = float(rng.choice(CHECK_TEMPERATURES))
    instance = {
        "anchor": unit_rows(rng, 1, dim)[0],
        "positives": unit_rows(rng, n_pos, dim),
        "negatives": unit_rows(rng, n_neg, dim),
    }
    scores = rng.uniform(0.05, 1.0, n_pos)
    return instance, tau, scores


def _contrast_adapter(kind: str, tau: float, scores=None):
    def fn(inst):
        if kind == "nce":
            res = nce_loss(inst["anchor"], inst["positives"], inst["negatives"], tau)
        elif kind == "pne":
            res = pne_loss(inst["anchor"], inst["positives"], inst["negatives"], tau)
        else:
            res = pne_group_loss(
                inst["anchor"], inst["positives"], inst["negatives"], tau, scores
            )
        grads = {
            "anchor": res.grad_anchor,
            "positives": res.grad_positives,
            "negatives": res.grad_negatives,
        }
        return res.value, grads

    return fn


def _ce_adapter(true_class: int):
    def fn(inst):
        res = pixel_cross_entropy(inst["logits"], true_class)
        return res.value, {"logits": res.grad_logits}

    return fn


def run_gradient_suite(trials: int = 100, seed: int = 0, h: float = DEFAULT_STEP) -> dict:
    """Finite-difference checks over seeded random instances of every loss.

    Returns a dict with one GradCheckReport per loss (as dicts), the overall
    worst relative error, and a pass flag at the 1e-6 tolerance.
    """
    reports = {}
    for name in ("nce", "pne", "pne_weighted", "ce"):
        worst = 0.0
        per_param: dict[str, float] = {}
        finite = True
        for trial in range(trials):
            rng = rng_from(seed, "gradcheck", name, trial)
            if name == "ce":
                n_classes = int(rng.integers(2, 11))
                instance = {"logits": rng.normal(0.0, 2.0, n_classes)}
                loss_fn = _ce_adapter(int(rng.integers(n_classes)))
            else:
                instance, tau, scores = random_contrast_instance(rng)
                loss_fn = _contrast_adapter(
                    name, tau, scores if name == "pne_weighted" else None
                )
            report = finite_diff_check(loss_fn, instance, h)
            worst = max(worst, report.max_rel_error)
            finite = finite and report.all_finite
            for key, err in report.per_param.items():
                per_param[key] = max(per_param.get(key, 0.0), err)
        reports[name] = GradCheckReport(
            max_rel_error=worst,
            per_param=per_param,
            step=h,
            n_instances=trials,
            all_finite=finite,
        )
    overall = max(r.max_rel_error for r in reports.values())
    return {
        "losses": {name: r.to_dict() for name, r in reports.items()},
        "max_rel_error": overall,
        "step": h,
        "trials": trials,
        "tolerance": GRAD_TOLERANCE,
        "passed": bool(overall < GRAD_TOLERANCE),
    }


def run_oracle_suite(trials: int = 50, seed: int = 0) -> dict:
    """Brute-force equivalence checks of the grouped loss and its identities.

    Per trial: random label/prediction map pairs drive the sampling pipeline
    and the grouped loss is compared against the flat per-anchor enumeration;
    the equal-count mean-form identity and the uniform-weight reduction are
    checked on random similarity instances. All comparisons use a 1e-12
    absolute tolerance.
    """
    from . import reference
    from .core import argmax_predict, softmax
    from .losses import ContrastConfig, grouped_contrast_loss, pne_group_loss, pne_loss
    from .sampling import SamplingConfig, build_sample_sets

    worst = {
        "grouped_pne": 0.0,
        "grouped_nce": 0.0,
        "equal_count_identity": 0.0,
        "uniform_weight_reduction": 0.0,
    }
    sampling_cfg = SamplingConfig()
    for trial in range(trials):
        rng = rng_from(seed, "oracle", trial)
        n_classes = int(rng.integers(3, 6))
        labels = rng.integers(0, n_classes, size=(8, 8))
        scores = softmax(rng.normal(0.0, 1.5, size=(8, 8, n_classes)), axis=-1)
        preds = argmax_predict(scores)
        emb = unit_rows(rng, 64, 8).reshape(8, 8, 8)
        tau = float(rng.choice((0.5, 1.0, 2.0)))
        _, sets = build_sample_sets(
            labels, preds, scores, sampling_cfg, seed_key=(seed, "oracle", trial)
        )

        cfg = ContrastConfig(temperature=tau, weighting="softmax")
        mine = grouped_contrast_loss(sets, emb, cfg, kind="pne").value
        ref = reference.grouped_loss_flat(sets, emb, tau, weighting="softmax", kind="pne")
        worst["grouped_pne"] = max(worst["grouped_pne"], abs(mine - ref))

        mine = grouped_contrast_loss(sets, emb, cfg, kind="nce").value
        ref = reference.grouped_loss_flat(sets, emb, tau, kind="nce")
        worst["grouped_nce"] = max(worst["grouped_nce"], abs(mine - ref))

        n_pairs = int(rng.integers(1, 65))
        sims = rng.uniform(-1.0, 1.0, size=2 * n_pairs)
        anchor, vecs = vectors_with_sims(sims)
        sim_tau = float(np.exp(rng.uniform(np.log(0.1), np.log(10.0))))
        value = pne_loss(anchor, vecs[:n_pairs], vecs[n_pairs:], sim_tau).value
        mean_form = reference.pne_ratio_of_means(sims[:n_pairs], sims[n_pairs:], sim_tau)
        worst["equal_count_identity"] = max(
            worst["equal_count_identity"], abs(value - mean_form)
        )

        const = float(rng.uniform(0.1, 1.0))
        weighted = pne_group_loss(
            anchor, vecs[:n_pairs], vecs[n_pairs:], sim_tau,
            positive_scores=np.full(n_pairs, const),
        ).value
        worst["uniform_weight_reduction"] = max(
            worst["uniform_weight_reduction"], abs(weighted - value)
        )

    tolerance = 1e-12
    return {
        "trials": trials,
        "max_abs_diff": worst,
        "tolerance": tolerance,
        "passed": bool(max(worst.values()) < tolerance),
    }


def balance_diagnostic(
    kind: str,
    anchor,
    positives,
    negatives,
    temperature: float = 1.0,
    multipliers=(1, 2, 4, 8),
    positive_scores=None,
) -> BalanceReport:
    """Similarity-gradient sums plus the loss under negative replication.

    The replication curve makes the count dependence visible: the
    per-positive softmax loss climbs as negatives are duplicated, the
    ratio form climbs only through the sum (joint replication of both sets
    leaves it unchanged, which is covered by its own invariance property).
    """
    negatives = np.asarray(negatives, dtype=np.float64)
    if kind == "nce":
        base = nce_loss(anchor, positives, negatives, temperature)
    elif kind == "pne":
        base = pne_group_loss(anchor, positives, negatives, temperature, positive_scores)
    else:
        raise ValueError(f"kind must be 'pne' or 'nce', got {kind!r}")

    curve = {}
    for m in multipliers:
        stacked = np.tile(negatives, (int(m), 1)) if negatives.size else negatives
        if kind == "nce":
            res = nce_loss(anchor, positives, stacked, temperature)
        else:
            res = pne_group_loss(anchor, positives, stacked, temperature, positive_scores)
        curve[int(m)] = res.value
    return BalanceReport(
        pos_sim_grad_sum=base.pos_sim_grad_sum,
        neg_sim_grad_sum=base.neg_sim_grad_sum,
        loss_by_multiplier=curve,
    )
