"""Contrastive and cross-entropy losses with closed-form gradients.

Two contrastive families are implemented over (anchor, positives, negatives)
embedding sets:

* ``nce_loss``: per-positive softmax contrast, averaged over positives. Its
  value grows with the raw negative count.
* ``pne_loss`` / ``pne_group_loss``: positive-negative-equal contrast,
  ``log(1 + sum_neg exp(s/t) / sum_pos w*exp(s/t))``. With matched set sizes
  the ratio of sums equals a ratio of means, so the value depends on pair
  similarities rather than pair counts. The weighted form scales each
  positive by its prediction confidence normalized to mean 1.

Every loss returns its gradients with respect to the participating
embeddings (and the underlying similarities); weights are treated as
constants. Exponentials are max-shifted so small temperatures cannot
overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOSS_MODES = ("ce", "ce+nce", "ce+pne")
WEIGHTINGS = ("uniform", "softmax")


@dataclass(frozen=True)
class ContrastConfig:
    """Temperature, combined-loss weight, and positive-weighting mode."""

    temperature: float = 1.0
    alpha: float = 1.3
    weighting: str = "softmax"

    def __post_init__(self):
        if not np.isfinite(self.temperature) or self.temperature <= 0:
            raise ValueError(f"temperature must be a positive real, got {self.temperature}")
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"weighting must be one of {WEIGHTINGS}, got {self.weighting!r}")


@dataclass
class LossResult:
    """Scalar loss plus gradients for one (anchor, positives, negatives) set.

    grad_pos_sims / grad_neg_sims are the derivatives with respect to the
    similarities; the embedding gradients are their chain-rule images.
    """

    value: float
    grad_anchor: np.ndarray
    grad_positives: np.ndarray
    grad_negatives: np.ndarray
    grad_pos_sims: np.ndarray
    grad_neg_sims: np.ndarray

    @property
    def pos_sim_grad_sum(self) -> float:
        return float(self.grad_pos_sims.sum())

    @property
    def neg_sim_grad_sum(self) -> float:
        return float(self.grad_neg_sims.sum())


@dataclass
class CrossEntropyResult:
    value: float
    grad_logits: np.ndarray


@dataclass
class GroupedLossResult:
    """Anchor-averaged grouped contrast loss over a whole scene.

    grad_array holds one embedding gradient row per scene pixel (zero for
    non-participants); participating_ids lists the pixels that entered the
    loss; ``grads`` exposes the same gradients as a table keyed by pixel id.
    n_anchors is the post-cap, post-skip anchor count used as the normalizer.
    """

    value: float
    grad_array: np.ndarray
    participating_ids: np.ndarray
    pos_sim_grad_sum: float = 0.0
    neg_sim_grad_sum: float = 0.0
    n_anchors: int = 0
    n_groups: int = 0
    n_skipped_groups: int = 0

    @property
    def grads(self) -> dict[int, np.ndarray]:
        return {int(pid): self.grad_array[pid] for pid in self.participating_ids}


def _as_vector(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {v.shape}")
    return v


def _as_matrix(x, dim: int, name: str) -> np.ndarray:
    m = np.asarray(x, dtype=np.float64)
    if m.size == 0:
        return m.reshape(0, dim)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2 or m.shape[1] != dim:
        raise ValueError(f"{name} must have shape (n, {dim}), got {m.shape}")
    return m


def _check_temperature(temperature: float) -> float:
    if not np.isfinite(temperature) or temperature <= 0:
        raise ValueError(f"temperature must be a positive real, got {temperature}")
    return float(temperature)


def per_positive_weights(scores) -> np.ndarray:
    """Normalize raw positive prediction scores to mean exactly 1."""
    w = _as_vector(scores, "positive scores")
    if w.size == 0:
        raise ValueError("at least one positive score is required")
    if not np.all(np.isfinite(w)) or np.any(w <= 0) or np.any(w > 1):
        raise ValueError("positive scores must lie in (0, 1]")
    return w / w.mean()


def nce_loss(anchor, positives, negatives, temperature: float = 1.0) -> LossResult:
    """Per-positive softmax contrast averaged over the positive set.

    Each positive is contrasted against the full negative set, so the value
    strictly increases when negatives are duplicated.
    """
    tau = _check_temperature(temperature)
    anchor = _as_vector(anchor, "anchor")
    pos = _as_matrix(positives, anchor.size, "positives")
    neg = _as_matrix(negatives, anchor.size, "negatives")
    if pos.shape[0] == 0:
        raise ValueError("nce_loss requires at least one positive")

    n_pos = pos.shape[0]
    z_pos = pos @ anchor / tau
    z_neg = neg @ anchor / tau
    if neg.shape[0] == 0:
        zeros_p = np.zeros(n_pos)
        return LossResult(0.0, np.zeros_like(anchor), np.zeros_like(pos),
                          np.zeros_like(neg), zeros_p, np.zeros(0))

    shift = np.maximum(z_pos, z_neg.max())                      # (P,)
    e_pos = np.exp(z_pos - shift)
    e_neg = np.exp(z_neg[None, :] - shift[:, None])             # (P, N)
    denom = e_pos + e_neg.sum(axis=1)
    value = float(np.mean(np.log(denom) + shift - z_pos))

    g_pos = -(1.0 - e_pos / denom) / (tau * n_pos)              # (P,)
    g_neg = (e_neg / denom[:, None]).sum(axis=0) / (tau * n_pos)  # (N,)
    return LossResult(
        value=value,
        grad_anchor=g_pos @ pos + g_neg @ neg,
        grad_positives=g_pos[:, None] * anchor,
        grad_negatives=g_neg[:, None] * anchor,
        grad_pos_sims=g_pos,
        grad_neg_sims=g_neg,
    )


def _pne_from_sims(z_pos, z_neg, weights, tau):
    """Value and similarity gradients of the ratio-form contrast.

    z_* are similarities already divided by tau; returns (value, g_pos, g_neg)
    where the g arrays are gradients with respect to the raw similarities.
    """
    if z_neg.size == 0:
        return 0.0, np.zeros_like(z_pos), np.zeros_like(z_neg)
    shift = max(z_pos.max(), z_neg.max())
    e_pos = weights * np.exp(z_pos - shift)
    e_neg = np.exp(z_neg - shift)
    a = e_pos.sum()
    b = e_neg.sum()
    value = float(np.log1p(b / a))
    g_pos = -(e_pos / a) * (b / (a + b)) / tau
    g_neg = e_neg / (a + b) / tau
    return value, g_pos, g_neg


def _pne_result(anchor, pos, neg, weights, tau) -> LossResult:
    z_pos = pos @ anchor / tau
    z_neg = neg @ anchor / tau
    value, g_pos, g_neg = _pne_from_sims(z_pos, z_neg, weights, tau)
    return LossResult(
        value=value,
        grad_anchor=g_pos @ pos + g_neg @ neg,
        grad_positives=g_pos[:, None] * anchor,
        grad_negatives=g_neg[:, None] * anchor,
        grad_pos_sims=g_pos,
        grad_neg_sims=g_neg,
    )


def pne_loss(anchor, positives, negatives, temperature: float = 1.0) -> LossResult:
    """Ratio-form contrast with uniform positive weights.

    Zero iff the negative set is empty; invariant under joint replication of
    the positive and negative sets.
    """
    tau = _check_temperature(temperature)
    anchor = _as_vector(anchor, "anchor")
    pos = _as_matrix(positives, anchor.size, "positives")
    neg = _as_matrix(negatives, anchor.size, "negatives")
    if pos.shape[0] == 0:
        raise ValueError("pne_loss requires at least one positive")
    return _pne_result(anchor, pos, neg, np.ones(pos.shape[0]), tau)


def pne_group_loss(
    anchor, positives, negatives, temperature: float = 1.0, positive_scores=None
) -> LossResult:
    """Ratio-form contrast with per-positive confidence weights.

    positive_scores are raw softmax probabilities in (0, 1]; they are
    normalized to mean 1 per group, so uniform scores reproduce
    ``pne_loss`` exactly. ``None`` means uniform weights.
    """
    tau = _check_temperature(temperature)
    anchor = _as_vector(anchor, "anchor")
    pos = _as_matrix(positives, anchor.size, "positives")
    neg = _as_matrix(negatives, anchor.size, "negatives")
    if pos.shape[0] == 0:
        raise ValueError("pne_group_loss requires at least one positive")
    if positive_scores is None:
        weights = np.ones(pos.shape[0])
    else:
        weights = per_positive_weights(positive_scores)
        if weights.size != pos.shape[0]:
            raise ValueError(
                f"got {weights.size} positive scores for {pos.shape[0]} positives"
            )
    return _pne_result(anchor, pos, neg, weights, tau)


def pixel_cross_entropy(logits, true_class: int) -> CrossEntropyResult:
    """Softmax cross entropy of one pixel's logits against its class id."""
    logits = _as_vector(logits, "logits")
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    if not 0 <= true_class < logits.size:
        raise ValueError(f"class id {true_class} out of range [0, {logits.size})")
    shift = logits.max()
    exp = np.exp(logits - shift)
    lse = np.log(exp.sum()) + shift
    value = float(lse - logits[true_class])
    grad = exp / exp.sum()
    grad[true_class] -= 1.0
    return CrossEntropyResult(value=value, grad_logits=grad)


def combined_loss(ce_value: float, contrast_value: float, alpha: float) -> float:
    """Weighted sum of cross entropy and contrast: ce + alpha * contrast."""
    if not (np.isfinite(ce_value) and np.isfinite(contrast_value)):
        raise ValueError("loss components must be finite")
    if not np.isfinite(alpha) or alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    return float(ce_value + alpha * contrast_value)


def _flat_embeddings(embeddings: np.ndarray) -> np.ndarray:
    emb = np.asarray(embeddings, dtype=np.float64)
    if emb.ndim == 3:
        emb = emb.reshape(-1, emb.shape[-1])
    if emb.ndim != 2:
        raise ValueError(f"embeddings must be (H, W, D) or (n_pixels, D), got {emb.shape}")
    return emb


def grouped_contrast_loss(
    sample_sets: dict,
    embeddings: np.ndarray,
    config: ContrastConfig,
    kind: str = "pne",
) -> GroupedLossResult:
    """Anchor-averaged contrast over all non-skipped anchor groups.

    Every anchor of group (l, k) is contrasted against the group's shared
    positives and negatives; the total is divided by the retained anchor
    count. Groups are reduced in sorted (l, k) order and anchors in pixel-id
    order, so the reduction is deterministic. With no usable groups the
    result is zero with an empty gradient table.
    """
    if kind not in ("pne", "nce"):
        raise ValueError(f"kind must be 'pne' or 'nce', got {kind!r}")
    emb = _flat_embeddings(embeddings)
    tau = config.temperature

    total = 0.0
    acc = np.zeros_like(emb)
    participating = []
    pos_sum = 0.0
    neg_sum = 0.0
    n_anchors = 0
    n_skipped = 0

    for group in sorted(sample_sets):
        sets = sample_sets[group]
        if sets.skipped:
            n_skipped += 1
            continue
        anchors = emb[sets.anchors]                      # (m, D)
        pos = emb[sets.positives]                        # (n, D)
        neg = emb[sets.negatives]                        # (n, D)
        z_pos = anchors @ pos.T / tau                    # (m, n)
        z_neg = anchors @ neg.T / tau

        if kind == "pne":
            if config.weighting == "softmax":
                scores = sets.positive_scores            # sampler guarantees (0, 1]
                weights = scores / scores.mean()
            else:
                weights = np.ones(pos.shape[0])
            shift = np.maximum(z_pos.max(axis=1), z_neg.max(axis=1))  # (m,)
            e_pos = np.exp(z_pos - shift[:, None]) * weights
            e_neg = np.exp(z_neg - shift[:, None])
            a = e_pos.sum(axis=1)
            b = e_neg.sum(axis=1)
            total += float(np.log1p(b / a).sum())
            g_pos = -(e_pos / a[:, None]) * (b / (a + b))[:, None] / tau   # (m, n)
            g_neg = e_neg / (a + b)[:, None] / tau
        else:
            n_pairs = pos.shape[0]
            shift = np.maximum(z_pos, z_neg.max(axis=1)[:, None])          # (m, n)
            e_pos = np.exp(z_pos - shift)
            e_neg = np.exp(z_neg[:, None, :] - shift[:, :, None])          # (m, n, n)
            denom = e_pos + e_neg.sum(axis=2)
            total += float((np.log(denom) + shift - z_pos).mean(axis=1).sum())
            g_pos = -(1.0 - e_pos / denom) / (tau * n_pairs)
            g_neg = (e_neg / denom[:, :, None]).sum(axis=1) / (tau * n_pairs)

        pos_sum += float(g_pos.sum())
        neg_sum += float(g_neg.sum())
        n_anchors += anchors.shape[0]

        # anchors, positives, and negatives are mutually disjoint and unique
        # within one group, so fancy-index accumulation is safe per set
        acc[sets.anchors] += g_pos @ pos + g_neg @ neg    # (m, D)
        acc[sets.positives] += g_pos.T @ anchors          # (n, D)
        acc[sets.negatives] += g_neg.T @ anchors
        participating.extend((sets.anchors, sets.positives, sets.negatives))

    if n_anchors == 0:
        return GroupedLossResult(
            0.0, np.zeros_like(emb), np.empty(0, dtype=np.int64),
            0.0, 0.0, 0, 0, n_skipped,
        )
    scale = 1.0 / n_anchors
    ids = np.unique(np.concatenate(participating))
    return GroupedLossResult(
        value=total * scale,
        grad_array=acc * scale,
        participating_ids=ids,
        pos_sim_grad_sum=pos_sum * scale,
        neg_sim_grad_sum=neg_sum * scale,
        n_anchors=n_anchors,
        n_groups=len(sample_sets) - n_skipped,
        n_skipped_groups=n_skipped,
    )


def pne_full_loss(sample_sets: dict, embeddings, config: ContrastConfig) -> GroupedLossResult:
    """Grouped positive-negative-equal loss over a scene's sample sets."""
    return grouped_contrast_loss(sample_sets, embeddings, config, kind="pne")


def nce_full_loss(sample_sets: dict, embeddings, config: ContrastConfig) -> GroupedLossResult:
    """Grouped per-positive softmax contrast over the same sample sets."""
    return grouped_contrast_loss(sample_sets, embeddings, config, kind="nce")
