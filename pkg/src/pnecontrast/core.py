"""Pixel-grid tensor primitives: softmax, normalization, similarity, argmax.

All arithmetic is float64. Reductions run in row-major pixel order so results
are deterministic.
"""

from __future__ import annotations

import numpy as np

from .validation import check_score_map


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax along ``axis``.

    Subtracts the running max before exponentiating, so arbitrarily large
    finite inputs stay finite. Raises ValueError on non-finite input.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("softmax input must be finite")
    shifted = logits - logits.max(axis=axis, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=axis, keepdims=True)


def l2_normalize(v: np.ndarray, axis: int = -1) -> np.ndarray:
    """Scale vectors along ``axis`` to unit Euclidean norm.

    Zero vectors have no direction and raise ValueError.
    """
    v = np.asarray(v, dtype=np.float64)
    norms = np.linalg.norm(v, axis=axis, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("cannot normalize a zero vector")
    return v / norms


def dot_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Inner product of two vectors; equals the cosine for unit inputs."""
    return float(np.dot(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)))


def argmax_predict(scores: np.ndarray) -> np.ndarray:
    """Per-pixel argmax class of an (H, W, C) score map.

    Ties break toward the lowest class id (np.argmax takes the first max).
    """
    scores = check_score_map(scores)
    return np.argmax(scores, axis=-1).astype(np.int64)
