"""Anchor grouping and matched positive/negative sample drawing.

Pixels are split by (prediction, label): correctly classified pixels form
per-class pools, misclassified pixels form anchor groups keyed by
``(predicted, actual)``. A group ``(l, k)`` draws its positives only from
pixels correctly classified as ``k`` and its negatives only from pixels
correctly classified as ``l``, with equal counts, so positive and negative
pairs carry the same weight in the downstream loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .validation import (
    check_label_map,
    check_same_shape,
    check_score_map,
    rng_from,
)

GroupKey = tuple[int, int]


@dataclass(frozen=True)
class SamplingConfig:
    """Knobs for anchor capping and pair drawing.

    anchor_cap bounds the total number of anchors retained across all
    groups; pairs_per_group bounds the matched positive/negative count
    drawn for a single group.
    """

    anchor_cap: int = 200
    pairs_per_group: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.anchor_cap < 1:
            raise ValueError(f"anchor_cap must be >= 1, got {self.anchor_cap}")
        if self.pairs_per_group < 1:
            raise ValueError(f"pairs_per_group must be >= 1, got {self.pairs_per_group}")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ValueError(f"seed must be a nonnegative int, got {self.seed!r}")


@dataclass
class PixelPartition:
    """Exhaustive, disjoint split of pixel ids by (prediction, label).

    correct[c] holds pixels predicted c with label c; anchor_groups[(l, k)]
    holds pixels predicted l with label k, l != k. All id arrays are sorted.
    """

    n_classes: int
    correct: dict[int, np.ndarray] = field(default_factory=dict)
    anchor_groups: dict[GroupKey, np.ndarray] = field(default_factory=dict)

    def total_anchors(self) -> int:
        return sum(len(ids) for ids in self.anchor_groups.values())


@dataclass
class SampleSets:
    """Drawn positives/negatives (and their anchors) for one group.

    positive_scores are the softmax probabilities of the group's true class
    at each positive pixel, captured at draw time. A group with no eligible
    positives or negatives comes back with empty pair arrays and
    ``skipped == True``; such groups contribute nothing to the loss.
    """

    group: GroupKey
    anchors: np.ndarray
    positives: np.ndarray
    negatives: np.ndarray
    positive_scores: np.ndarray

    @property
    def skipped(self) -> bool:
        return self.positives.size == 0

    @property
    def n_pairs(self) -> int:
        return int(self.positives.size)


def partition_pixels(labels, preds, n_classes: int | None = None) -> PixelPartition:
    """Group every pixel id by its (prediction, label) combination."""
    labels = check_label_map(labels, name="labels")
    preds = check_label_map(preds, name="preds")
    check_same_shape(labels, preds, "labels/preds")
    if n_classes is None:
        n_classes = int(max(labels.max(), preds.max())) + 1
    labels = check_label_map(labels, n_classes, name="labels")
    preds = check_label_map(preds, n_classes, name="preds")

    flat_labels = labels.ravel()
    flat_preds = preds.ravel()
    ids = np.arange(flat_labels.size, dtype=np.int64)

    correct_mask = flat_labels == flat_preds
    correct = {
        c: ids[correct_mask & (flat_labels == c)] for c in range(n_classes)
    }

    groups: dict[GroupKey, np.ndarray] = {}
    wrong = ids[~correct_mask]
    if wrong.size:
        keys = flat_preds[wrong] * n_classes + flat_labels[wrong]
        for key in np.unique(keys):
            groups[(int(key) // n_classes, int(key) % n_classes)] = wrong[keys == key]
    return PixelPartition(n_classes=n_classes, correct=correct, anchor_groups=groups)


def cap_anchors(
    partition: PixelPartition, config: SamplingConfig, rng: np.random.Generator
) -> PixelPartition:
    """Subsample anchor groups so the total anchor count fits the cap.

    Quotas are proportional to group sizes (floor), the remaining slots are
    assigned by the RNG weighted by the fractional remainders, and each
    group is then subsampled uniformly without replacement. Returns the
    partition unchanged when already under the cap.
    """
    total = partition.total_anchors()
    cap = config.anchor_cap
    if total <= cap:
        return partition

    keys = sorted(partition.anchor_groups)
    sizes = np.array([len(partition.anchor_groups[k]) for k in keys], dtype=np.int64)
    quotas = sizes * cap // total
    remainders = (sizes * cap % total).astype(np.float64)
    leftover = cap - int(quotas.sum())
    if leftover > 0:
        eligible = np.flatnonzero(remainders > 0)
        bump = rng.choice(
            eligible, size=leftover, replace=False, p=remainders[eligible] / remainders[eligible].sum()
        )
        quotas[bump] += 1

    capped: dict[GroupKey, np.ndarray] = {}
    for key, quota in zip(keys, quotas):
        ids = partition.anchor_groups[key]
        if quota <= 0:
            continue
        if quota < len(ids):
            ids = np.sort(rng.choice(ids, size=int(quota), replace=False))
        capped[key] = ids
    return PixelPartition(
        n_classes=partition.n_classes, correct=partition.correct, anchor_groups=capped
    )


def draw_samples(
    partition: PixelPartition,
    group: GroupKey,
    scores: np.ndarray,
    config: SamplingConfig,
    rng: np.random.Generator,
    negative_factor: int = 1,
) -> SampleSets:
    """Draw positives/negatives for one anchor group.

    The matched draw (default) uses min(|correct[k]|, |correct[l]|,
    pairs_per_group) of each. ``negative_factor > 1`` oversamples negatives
    by that factor (up to the pool), reproducing the count imbalance of the
    conventional asymmetric baseline; only the default satisfies the
    equal-count invariant. A count of zero on either side yields a skipped
    marker rather than an error.
    """
    pred_l, label_k = group
    anchors = partition.anchor_groups[group]
    if anchors.size == 0:
        raise ValueError(f"anchor group {group} is empty")
    if negative_factor < 1:
        raise ValueError(f"negative_factor must be >= 1, got {negative_factor}")
    empty = np.empty(0, dtype=np.int64)

    pos_pool = partition.correct.get(label_k, empty)
    neg_pool = partition.correct.get(pred_l, empty)
    n = min(pos_pool.size, neg_pool.size, config.pairs_per_group)
    if n == 0:
        return SampleSets(group, anchors, empty, empty, np.empty(0, dtype=np.float64))
    n_neg = min(neg_pool.size, n * negative_factor)

    positives = np.sort(rng.choice(pos_pool, size=n, replace=False))
    negatives = np.sort(rng.choice(neg_pool, size=n_neg, replace=False))
    flat_scores = np.asarray(scores, dtype=np.float64).reshape(-1, scores.shape[-1])
    positive_scores = flat_scores[positives, label_k]
    return SampleSets(group, anchors, positives, negatives, positive_scores)


def build_sample_sets(
    labels,
    preds,
    scores,
    config: SamplingConfig,
    seed_key: tuple = None,
    negative_factor: int = 1,
) -> tuple[PixelPartition, dict[GroupKey, SampleSets]]:
    """Partition, cap, and draw sample sets for every anchor group.

    Each group uses an RNG stream derived from (seed_key, l, k), so the
    result does not depend on iteration order and groups could be drawn
    concurrently. ``seed_key`` defaults to ``(config.seed,)``.
    """
    scores = check_score_map(scores)
    n_classes = scores.shape[-1]
    labels = check_label_map(labels, n_classes, name="labels")
    preds = check_label_map(preds, n_classes, name="preds")
    check_same_shape(labels, scores, "labels/scores")

    if seed_key is None:
        seed_key = (config.seed,)
    partition = partition_pixels(labels, preds, n_classes)
    partition = cap_anchors(partition, config, rng_from(*seed_key, "cap"))
    sets = {}
    for group in sorted(partition.anchor_groups):
        sets[group] = draw_samples(
            partition, group, scores, config,
            rng_from(*seed_key, group[0], group[1]), negative_factor,
        )
    return partition, sets
