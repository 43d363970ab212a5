"""Input validation helpers and seeded RNG stream derivation.

Pixel-grid data is passed around as plain ndarrays with fixed conventions:

* embedding map: float ``(H, W, D)``, every pixel vector unit norm, D >= 2
* score map:     float ``(H, W, C)``, rows nonnegative and summing to 1
* label map:     integer ``(H, W)`` with entries in ``[0, C)``
* prediction map: same as label map, per-pixel argmax of the score map

Pixel ids are row-major flat indices (``row * width + col``).
"""

from __future__ import annotations

import hashlib

import numpy as np

UNIT_NORM_ATOL = 1e-9
PROB_SUM_ATOL = 1e-9


def seed_from(*parts) -> int:
    """Derive a stable 63-bit seed from a sequence of ints/strings.

    Uses SHA-256 of the textual key, so streams are reproducible across
    processes and platforms and adding a new named stream never perturbs
    existing ones.
    """
    key = "/".join(str(p) for p in parts)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def rng_from(*parts) -> np.random.Generator:
    """Seeded generator for the stream named by ``parts``."""
    return np.random.default_rng(seed_from(*parts))


def check_random_state(seed) -> np.random.Generator:
    """Turn ``seed`` into a numpy Generator.

    Accepts None (fresh OS entropy), ints, and existing Generators.
    """
    if seed is None or isinstance(seed, (int, np.integer)):
        return np.random.default_rng(seed)
    if isinstance(seed, np.random.Generator):
        return seed
    raise ValueError(f"cannot use {seed!r} to seed a random generator")


def check_embedding_map(emb, name: str = "embeddings") -> np.ndarray:
    """Validate an (H, W, D) unit-norm embedding map, returned as float64."""
    emb = np.asarray(emb, dtype=np.float64)
    if emb.ndim != 3:
        raise ValueError(f"{name} must have shape (H, W, D), got {emb.shape}")
    h, w, d = emb.shape
    if d < 2:
        raise ValueError(f"{name} embedding dim must be >= 2, got {d}")
    if h * w < 1:
        raise ValueError(f"{name} must contain at least one pixel")
    if not np.all(np.isfinite(emb)):
        raise ValueError(f"{name} contains non-finite values")
    norms = np.linalg.norm(emb, axis=-1)
    if not np.allclose(norms, 1.0, rtol=0.0, atol=UNIT_NORM_ATOL):
        worst = float(np.abs(norms - 1.0).max())
        raise ValueError(f"{name} pixel vectors must be unit norm (max |norm-1| = {worst:g})")
    return emb


def check_score_map(scores, name: str = "scores") -> np.ndarray:
    """Validate an (H, W, C) per-pixel probability map, returned as float64."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 3:
        raise ValueError(f"{name} must have shape (H, W, C), got {scores.shape}")
    if not np.all(np.isfinite(scores)):
        raise ValueError(f"{name} contains non-finite values")
    if np.any(scores < 0):
        raise ValueError(f"{name} contains negative probabilities")
    sums = scores.sum(axis=-1)
    if not np.allclose(sums, 1.0, rtol=0.0, atol=PROB_SUM_ATOL):
        worst = float(np.abs(sums - 1.0).max())
        raise ValueError(f"{name} rows must sum to 1 (max |sum-1| = {worst:g})")
    return scores


def check_label_map(labels, n_classes: int | None = None, name: str = "labels") -> np.ndarray:
    """Validate an (H, W) integer class-id map, returned as int64."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError(f"{name} must have shape (H, W), got {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise ValueError(f"{name} must be an integer array, got dtype {labels.dtype}")
    labels = labels.astype(np.int64)
    if labels.size == 0:
        raise ValueError(f"{name} must contain at least one pixel")
    if labels.min() < 0:
        raise ValueError(f"{name} contains negative class ids")
    if n_classes is not None and labels.max() >= n_classes:
        raise ValueError(
            f"{name} contains class id {int(labels.max())} >= n_classes={n_classes}"
        )
    return labels


def check_same_shape(a: np.ndarray, b: np.ndarray, names: str = "inputs") -> None:
    if a.shape[:2] != b.shape[:2]:
        raise ValueError(f"{names} have mismatched shapes {a.shape[:2]} vs {b.shape[:2]}")
