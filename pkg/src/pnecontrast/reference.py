"""Naive reference implementations used as independent oracles.

Everything here is written with plain Python loops, ``math.exp`` and no
stabilization or grouping machinery, so it shares no code with the
vectorized loss path it validates. Used by the test suite and by the
``oracle-test`` CLI subcommand.
"""

from __future__ import annotations

import math

import numpy as np


def nce_direct(pos_sims, neg_sims, tau: float) -> float:
    """Per-positive softmax contrast evaluated term by term."""
    neg_total = sum(math.exp(s / tau) for s in neg_sims)
    total = 0.0
    for s in pos_sims:
        e = math.exp(s / tau)
        total += -math.log(e / (e + neg_total))
    return total / len(pos_sims)


def pne_ratio_of_sums(pos_sims, neg_sims, tau: float) -> float:
    """log(1 + sum_neg exp / sum_pos exp), the basic ratio form."""
    num = sum(math.exp(s / tau) for s in neg_sims)
    den = sum(math.exp(s / tau) for s in pos_sims)
    return math.log(1.0 + num / den)


def pne_ratio_of_means(pos_sims, neg_sims, tau: float) -> float:
    """log(1 + mean_neg exp / mean_pos exp); equals the sum form iff counts match."""
    num = sum(math.exp(s / tau) for s in neg_sims) / len(neg_sims)
    den = sum(math.exp(s / tau) for s in pos_sims) / len(pos_sims)
    return math.log(1.0 + num / den)


def pne_weighted_direct(pos_sims, raw_scores, neg_sims, tau: float) -> float:
    """Confidence-weighted ratio form with mean-normalized weights."""
    mean_w = sum(raw_scores) / len(raw_scores)
    den = sum((w / mean_w) * math.exp(s / tau) for w, s in zip(raw_scores, pos_sims))
    num = sum(math.exp(s / tau) for s in neg_sims)
    return math.log(1.0 + num / den)


def grouped_loss_flat(
    sample_sets: dict,
    embeddings,
    tau: float,
    weighting: str = "softmax",
    kind: str = "pne",
) -> float:
    """Flat enumeration of the grouped loss: one term per (l, k, anchor).

    Iterates every anchor of every non-skipped group directly and averages
    by the total anchor count, with no per-group vectorization.
    """
    emb = np.asarray(embeddings, dtype=np.float64)
    if emb.ndim == 3:
        emb = emb.reshape(-1, emb.shape[-1])

    total = 0.0
    count = 0
    for group in sorted(sample_sets):
        sets = sample_sets[group]
        if sets.skipped:
            continue
        pos_vecs = [emb[p] for p in sets.positives]
        neg_vecs = [emb[p] for p in sets.negatives]
        scores = list(sets.positive_scores)
        for anchor_id in sets.anchors:
            a = emb[anchor_id]
            pos_sims = [float(np.dot(a, v)) for v in pos_vecs]
            neg_sims = [float(np.dot(a, v)) for v in neg_vecs]
            if kind == "pne":
                if weighting == "softmax":
                    total += pne_weighted_direct(pos_sims, scores, neg_sims, tau)
                else:
                    total += pne_ratio_of_sums(pos_sims, neg_sims, tau)
            else:
                total += nce_direct(pos_sims, neg_sims, tau)
            count += 1
    return total / count if count else 0.0
