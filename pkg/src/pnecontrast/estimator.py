"""Sklearn-style per-pixel segmenter trained with CE plus pixel contrast.

The estimator consumes batches of scenes shaped ``(n_scenes, H, W, F)`` with
integer label maps ``(n_scenes, H, W)`` and learns a tiny shared network.
``loss_mode`` selects plain cross entropy, cross entropy plus the
per-positive softmax contrast, or cross entropy plus the
positive-negative-equal contrast; the contrastive term runs over
misclassified-pixel anchor groups re-sampled from the live predictions at
every step.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import metrics
from .core import argmax_predict
from .losses import LOSS_MODES, ContrastConfig, grouped_contrast_loss
from .model import (
    TrainingDivergenceError,
    backward,
    batch_cross_entropy,
    forward,
    init_params,
    poly_lr,
    sgd_update,
)
from .sampling import SamplingConfig, build_sample_sets
from .validation import rng_from, seed_from

_KIND_BY_MODE = {"ce": None, "ce+nce": "nce", "ce+pne": "pne"}


def batch_losses(state, flat_labels, sets_per_scene, scene_pixels, config, kind):
    """Combined loss over a forwarded batch with frozen sample sets.

    Returns (total, ce, contrast, d_logits, d_embeddings); the contrast term
    is averaged over scenes and weighted by ``config.alpha`` in the total.
    ``kind=None`` computes cross entropy only.
    """
    ce, d_logits = batch_cross_entropy(state.logits, flat_labels)
    if kind is None:
        return ce, ce, 0.0, d_logits, None

    n_scenes = len(sets_per_scene)
    contrast = 0.0
    d_emb = np.zeros_like(state.embeddings)
    for s, sets in enumerate(sets_per_scene):
        offset = s * scene_pixels
        result = grouped_contrast_loss(
            sets, state.embeddings[offset : offset + scene_pixels], config, kind
        )
        contrast += result.value
        d_emb[offset : offset + scene_pixels] += result.grad_array
    contrast /= n_scenes
    d_emb *= config.alpha / n_scenes
    total = ce + config.alpha * contrast
    return total, ce, contrast, d_logits, d_emb


def batch_objective_value(params, flat_x, flat_labels, sets_per_scene, scene_pixels, config, kind):
    """Scalar objective for a parameter setting with frozen sample sets."""
    state = forward(params, flat_x)
    return batch_losses(state, flat_labels, sets_per_scene, scene_pixels, config, kind)[0]


class ContrastiveSegmenter(BaseEstimator):
    """Toy per-pixel segmenter with an optional pixel-contrast objective.

    Parameters
    ----------
    loss_mode : {"ce", "ce+nce", "ce+pne"}
        Training objective. Contrast modes add ``alpha`` times the grouped
        contrastive loss over misclassified-pixel anchors.
    hidden_dim : int
        Width of the shared feature extractor (and projection hidden layer).
    embed_dim : int
        Dimension of the unit-norm contrastive embeddings.
    learning_rate : float
        Base SGD learning rate, decayed by ``(1 - t/T) ** 0.9``.
    momentum, weight_decay : float
        Classic SGD momentum and L2 decay added to the gradient.
    n_iterations : int
        Number of SGD steps; each step re-draws ``batch_size`` scenes.
    batch_size : int
        Scenes per step.
    temperature : float
        Similarity divisor of the contrast losses.
    alpha : float
        Weight of the contrast term in the combined loss.
    weighting : {"softmax", "uniform"}
        Per-positive confidence weighting of the ratio-form loss.
    anchor_cap : int
        Max total anchors retained per scene and step.
    pairs_per_group : int
        Max matched positive/negative pairs per anchor group.
    random_state : int or None
        Seed for all derived RNG streams (init, batching, sampling,
        evaluation subsampling). None draws fresh entropy.

    Attributes
    ----------
    params_ : dict of str to ndarray
        Trained network parameters.
    classes_ : ndarray
        Class ids ``0..C-1`` seen during fit.
    loss_history_ : list of dict
        Per-step ``{"iteration", "ce", "contrast", "total", "lr"}``.
    eval_records_ : list of dict
        Held-out metrics, populated when ``fit`` gets an ``eval_set``.
    """

    def __init__(
        self,
        loss_mode: str = "ce+pne",
        hidden_dim: int = 32,
        embed_dim: int = 16,
        learning_rate: float = 0.1,
        momentum: float = 0.9,
        weight_decay: float = 0.0005,
        n_iterations: int = 2000,
        batch_size: int = 4,
        temperature: float = 1.0,
        alpha: float = 1.3,
        weighting: str = "softmax",
        anchor_cap: int = 200,
        pairs_per_group: int = 64,
        random_state: int | None = None,
    ):
        self.loss_mode = loss_mode
        self.hidden_dim = hidden_dim
        self.embed_dim = embed_dim
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.n_iterations = n_iterations
        self.batch_size = batch_size
        self.temperature = temperature
        self.alpha = alpha
        self.weighting = weighting
        self.anchor_cap = anchor_cap
        self.pairs_per_group = pairs_per_group
        self.random_state = random_state

    # ----------------------------------------------------------- validation

    def _check_params(self):
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"loss_mode must be one of {LOSS_MODES}, got {self.loss_mode!r}")
        if self.hidden_dim < 2 or self.embed_dim < 2:
            raise ValueError("hidden_dim and embed_dim must be >= 2")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.n_iterations < 0:
            raise ValueError(f"n_iterations must be >= 0, got {self.n_iterations}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.random_state is not None and (
            not isinstance(self.random_state, (int, np.integer)) or self.random_state < 0
        ):
            raise ValueError(f"random_state must be a nonnegative int or None")
        contrast = ContrastConfig(
            temperature=self.temperature, alpha=self.alpha, weighting=self.weighting
        )
        sampling = SamplingConfig(
            anchor_cap=self.anchor_cap, pairs_per_group=self.pairs_per_group
        )
        return contrast, sampling

    @staticmethod
    def _check_scenes(X, n_features=None):
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 3
        if single:
            X = X[None]
        if X.ndim != 4:
            raise ValueError(f"X must have shape (n_scenes, H, W, F), got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite values")
        if n_features is not None and X.shape[-1] != n_features:
            raise ValueError(f"X has {X.shape[-1]} features, expected {n_features}")
        return X, single

    @staticmethod
    def _check_targets(y, n_scenes, shape):
        y = np.asarray(y)
        if y.ndim == 2:
            y = y[None]
        if y.shape != (n_scenes,) + shape:
            raise ValueError(f"y must have shape {(n_scenes,) + shape}, got {y.shape}")
        if not np.issubdtype(y.dtype, np.integer):
            raise ValueError(f"y must be integer class ids, got dtype {y.dtype}")
        y = y.astype(np.int64)
        if y.min() < 0:
            raise ValueError("y contains negative class ids")
        return y

    # ------------------------------------------------------------- training

    def fit(self, X, y, eval_set=None, eval_every: int = 0):
        """Train on scenes X (n, H, W, F) with label maps y (n, H, W).

        When ``eval_set=(X_eval, y_eval)`` is given together with
        ``eval_every > 0``, held-out metrics are recorded before training,
        every ``eval_every`` steps, and after the final step.
        """
        contrast_cfg, sampling_cfg = self._check_params()
        X, _ = self._check_scenes(X)
        y = self._check_targets(y, X.shape[0], X.shape[1:3])

        seed = self.random_state
        if seed is None:
            seed = int(np.random.SeedSequence().entropy % (2**63))
        self.random_seed_ = int(seed)
        self.classes_ = np.arange(int(y.max()) + 1, dtype=np.int64)
        self.n_classes_ = int(self.classes_.size)
        if self.n_classes_ < 2:
            raise ValueError("training labels must contain at least two classes")
        self.n_features_in_ = int(X.shape[-1])

        self.params_ = init_params(
            self.n_features_in_, self.hidden_dim, self.embed_dim, self.n_classes_,
            rng_from(seed, "init"),
        )
        self._buffers = {name: np.zeros_like(p) for name, p in self.params_.items()}
        self._contrast_cfg = contrast_cfg
        self._sampling_cfg = sampling_cfg
        self._sampling_seed = seed_from(seed, "sampling")
        batch_rng = rng_from(seed, "batches")

        self.loss_history_ = []
        self.eval_records_ = []
        do_eval = eval_set is not None and eval_every > 0
        if do_eval:
            self.eval_records_.append(self._evaluate(eval_set, 0))

        n_scenes = X.shape[0]
        for it in range(self.n_iterations):
            idx = batch_rng.integers(0, n_scenes, size=self.batch_size)
            step = self._train_step(it, X[idx], y[idx])
            self.loss_history_.append(step)
            done = it + 1
            if do_eval and (done % eval_every == 0 or done == self.n_iterations):
                self.eval_records_.append(self._evaluate(eval_set, done))

        self.n_iter_ = self.n_iterations
        return self

    def _draw_batch_sets(self, state, batch_labels, iteration):
        n_scenes, height, width = batch_labels.shape
        pixels = height * width
        sets_per_scene = []
        for s in range(n_scenes):
            scores = state.scores[s * pixels : (s + 1) * pixels].reshape(
                height, width, self.n_classes_
            )
            preds = argmax_predict(scores)
            _, sets = build_sample_sets(
                batch_labels[s], preds, scores, self._sampling_cfg,
                seed_key=(self._sampling_seed, iteration, s),
            )
            sets_per_scene.append(sets)
        return sets_per_scene

    def _train_step(self, iteration, batch_x, batch_y):
        pixels = batch_y.shape[1] * batch_y.shape[2]
        flat_x = batch_x.reshape(-1, batch_x.shape[-1])
        flat_y = batch_y.reshape(-1)
        kind = _KIND_BY_MODE[self.loss_mode]

        state = forward(self.params_, flat_x)
        sets_per_scene = (
            self._draw_batch_sets(state, batch_y, iteration) if kind else None
        )
        total, ce, contrast, d_logits, d_emb = batch_losses(
            state, flat_y, sets_per_scene, pixels, self._contrast_cfg, kind
        )
        if not np.isfinite(total):
            raise TrainingDivergenceError(iteration)

        grads = backward(self.params_, state, d_logits, d_emb)
        lr = poly_lr(self.learning_rate, iteration, self.n_iterations)
        sgd_update(self.params_, grads, self._buffers, lr, self.momentum, self.weight_decay)
        return {"iteration": iteration, "ce": ce, "contrast": contrast, "total": total, "lr": lr}

    # ------------------------------------------------------------ inference

    def _forward_batch(self, X):
        check_is_fitted(self, "params_")
        X, single = self._check_scenes(X, self.n_features_in_)
        state = forward(self.params_, X.reshape(-1, X.shape[-1]))
        return state, X.shape, single

    def predict_proba(self, X) -> np.ndarray:
        """Per-pixel class probabilities, shape (n, H, W, C)."""
        state, shape, single = self._forward_batch(X)
        out = state.scores.reshape(shape[:3] + (self.n_classes_,))
        return out[0] if single else out

    def predict(self, X) -> np.ndarray:
        """Per-pixel argmax class ids, shape (n, H, W)."""
        state, shape, single = self._forward_batch(X)
        preds = np.argmax(state.scores, axis=-1).astype(np.int64).reshape(shape[:3])
        return preds[0] if single else preds

    def transform(self, X) -> np.ndarray:
        """Per-pixel unit-norm contrastive embeddings, shape (n, H, W, D)."""
        state, shape, single = self._forward_batch(X)
        emb = state.embeddings.reshape(shape[:3] + (self.embed_dim,))
        return emb[0] if single else emb

    def score(self, X, y) -> float:
        """Mean IoU over all scenes, stacked into one joint map."""
        X, _ = self._check_scenes(X, self.n_features_in_)
        y = self._check_targets(y, X.shape[0], X.shape[1:3])
        preds = self.predict(X)
        joint_preds = preds.reshape(-1, preds.shape[-1])
        joint_labels = y.reshape(-1, y.shape[-1])
        return metrics.miou(joint_preds, joint_labels, self.n_classes_)[1]

    # ----------------------------------------------------------- evaluation

    def _evaluate(self, eval_set, iteration: int) -> dict:
        """Held-out metrics and losses at a given training iteration."""
        X_eval, y_eval = eval_set
        X_eval, _ = self._check_scenes(X_eval, self.n_features_in_)
        y_eval = self._check_targets(y_eval, X_eval.shape[0], X_eval.shape[1:3])
        n_scenes, height, width = y_eval.shape
        pixels = height * width

        state = forward(self.params_, X_eval.reshape(-1, X_eval.shape[-1]))
        joint_labels = y_eval.reshape(n_scenes * height, width)
        joint_preds = np.argmax(state.scores, axis=-1).astype(np.int64).reshape(
            n_scenes * height, width
        )
        per_class, mean_iou = metrics.miou(joint_preds, joint_labels, self.n_classes_)
        emb_map = state.embeddings.reshape(n_scenes * height, width, self.embed_dim)

        align = metrics.alignment(
            emb_map, joint_labels, rng=rng_from(self.random_seed_, "metrics", iteration, "a")
        )
        uniform = metrics.uniformity(
            emb_map, rng=rng_from(self.random_seed_, "metrics", iteration, "u")
        )

        kind = _KIND_BY_MODE[self.loss_mode]
        sets_per_scene = None
        if kind:
            sets_per_scene = []
            for s in range(n_scenes):
                scores = state.scores[s * pixels : (s + 1) * pixels].reshape(
                    height, width, self.n_classes_
                )
                _, sets = build_sample_sets(
                    y_eval[s], argmax_predict(scores), scores, self._sampling_cfg,
                    seed_key=(self._sampling_seed, "eval", iteration, s),
                    negative_factor=self._negative_factor(),
                )
                sets_per_scene.append(sets)
        total, ce, contrast, _, _ = batch_losses(
            state, y_eval.reshape(-1), sets_per_scene, pixels, self._contrast_cfg, kind
        )
        return {
            "iteration": iteration,
            "miou": mean_iou,
            "per_class_iou": [float(v) if np.isfinite(v) else None for v in per_class],
            "alignment": align,
            "uniformity": uniform,
            "loss_ce": ce,
            "loss_contrast": contrast,
            "loss_total": total,
        }
