"""Evaluation metrics and embedding dumps.

``alignment`` (intra-class compactness, lower is better) is the mean squared
Euclidean distance over same-class pixel pairs; ``uniformity`` (inter-class
spread, lower is better) is the log of the Gaussian-kernel mean
``exp(-2 |u - v|^2)`` over all distinct pixel pairs. Both subsample to a
pair budget with a seeded RNG once the exhaustive pair count exceeds it.
An undefined metric (no eligible pair) comes back as NaN.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .validation import (
    check_embedding_map,
    check_label_map,
    check_random_state,
    check_same_shape,
)

DEFAULT_PAIR_BUDGET = 100_000
UNIFORMITY_T = 2.0


def miou(preds, labels, n_classes: int) -> tuple[np.ndarray, float]:
    """Per-class IoU and its mean; absent classes are NaN and excluded."""
    labels = check_label_map(labels, n_classes, name="labels")
    preds = check_label_map(preds, n_classes, name="preds")
    check_same_shape(labels, preds, "preds/labels")

    confusion = np.bincount(
        labels.ravel() * n_classes + preds.ravel(), minlength=n_classes * n_classes
    ).reshape(n_classes, n_classes)
    tp = np.diag(confusion).astype(np.float64)
    fn = confusion.sum(axis=1) - tp
    fp = confusion.sum(axis=0) - tp
    denom = tp + fp + fn
    per_class = np.full(n_classes, np.nan)
    present = denom > 0
    per_class[present] = tp[present] / denom[present]
    mean = float(per_class[present].mean()) if present.any() else float("nan")
    return per_class, mean


def _sample_distinct_pairs(rng, group_sizes: np.ndarray, n_draws: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Uniform (group, i, j) draws over distinct within-group pairs."""
    weights = group_sizes * (group_sizes - 1) / 2.0
    probs = weights / weights.sum()
    groups = rng.choice(group_sizes.size, size=n_draws, p=probs)
    sizes = group_sizes[groups]
    i = rng.integers(0, sizes)
    j = rng.integers(0, sizes - 1)
    j = j + (j >= i)
    return groups, i, j


def alignment(
    embeddings, labels, max_pairs: int = DEFAULT_PAIR_BUDGET, rng=None
) -> float:
    """Mean squared distance over same-class pixel pairs (NaN if none)."""
    emb = check_embedding_map(embeddings)
    labels = check_label_map(labels, name="labels")
    check_same_shape(emb, labels, "embeddings/labels")
    flat_emb = emb.reshape(-1, emb.shape[-1])
    flat_labels = labels.ravel()

    class_ids = [np.flatnonzero(flat_labels == c) for c in np.unique(flat_labels)]
    class_ids = [ids for ids in class_ids if ids.size >= 2]
    if not class_ids:
        return float("nan")
    sizes = np.array([ids.size for ids in class_ids], dtype=np.int64)
    total_pairs = int((sizes * (sizes - 1) // 2).sum())

    if total_pairs <= max_pairs:
        acc = 0.0
        for ids in class_ids:
            vecs = flat_emb[ids]
            diff = vecs[:, None, :] - vecs[None, :, :]
            d2 = (diff**2).sum(axis=-1)
            acc += d2.sum() / 2.0
        return float(acc / total_pairs)

    rng = check_random_state(0 if rng is None else rng)
    groups, i, j = _sample_distinct_pairs(rng, sizes, max_pairs)
    acc = 0.0
    for g, ids in enumerate(class_ids):
        mask = groups == g
        if not mask.any():
            continue
        u = flat_emb[ids[i[mask]]]
        v = flat_emb[ids[j[mask]]]
        acc += ((u - v) ** 2).sum()
    return float(acc / max_pairs)


def uniformity(
    embeddings, max_pairs: int = DEFAULT_PAIR_BUDGET, rng=None, t: float = UNIFORMITY_T
) -> float:
    """log mean exp(-t * squared distance) over all distinct pixel pairs."""
    emb = check_embedding_map(embeddings)
    flat = emb.reshape(-1, emb.shape[-1])
    n = flat.shape[0]
    if n < 2:
        return float("nan")
    total_pairs = n * (n - 1) // 2

    if total_pairs <= max_pairs:
        diff = flat[:, None, :] - flat[None, :, :]
        d2 = (diff**2).sum(axis=-1)
        kernel = np.exp(-t * d2)
        mean = (kernel.sum() - n) / (n * (n - 1))
        return float(np.log(mean))

    rng = check_random_state(0 if rng is None else rng)
    i = rng.integers(0, n, size=max_pairs)
    j = rng.integers(0, n - 1, size=max_pairs)
    j = j + (j >= i)
    d2 = ((flat[i] - flat[j]) ** 2).sum(axis=-1)
    return float(np.log(np.exp(-t * d2).mean()))


def dump_embeddings(embeddings, labels, preds, path) -> int:
    """Write one CSV row per pixel: pixel id, label, prediction, coordinates.

    Floats are printed with 9 significant digits; returns the row count.
    """
    emb = check_embedding_map(embeddings)
    labels = check_label_map(labels, name="labels")
    preds = check_label_map(preds, name="preds")
    check_same_shape(emb, labels, "embeddings/labels")
    check_same_shape(emb, preds, "embeddings/preds")

    dim = emb.shape[-1]
    flat_emb = emb.reshape(-1, dim)
    flat_labels = labels.ravel()
    flat_preds = preds.ravel()
    header = "pixel,label,pred," + ",".join(f"e{i}" for i in range(dim))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for pid in range(flat_emb.shape[0]):
            coords = ",".join(f"{v:.9g}" for v in flat_emb[pid])
            fh.write(f"{pid},{flat_labels[pid]},{flat_preds[pid]},{coords}\n")
    return flat_emb.shape[0]


def _jsonable(value):
    """Recursively convert to JSON-safe types; non-finite floats become None."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    return value


@dataclass
class ExperimentReport:
    """Config echo, per-evaluation records, and the final summary.

    ``wall_clock_seconds`` is informational only and excluded from the
    serialized report so identical runs stay byte-identical on disk.
    """

    config: dict
    records: list = field(default_factory=list)
    final: dict = field(default_factory=dict)
    wall_clock_seconds: float = 0.0

    def to_json_dict(self, include_timing: bool = False) -> dict:
        out = {
            "config": _jsonable(self.config),
            "records": _jsonable(self.records),
            "final": _jsonable(self.final),
        }
        if include_timing:
            out["wall_clock_seconds"] = self.wall_clock_seconds
        return out
