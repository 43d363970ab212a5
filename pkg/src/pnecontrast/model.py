"""Per-pixel toy network with hand-written backprop.

Architecture: shared affine + tanh feature extractor, a linear segmentation
head producing class logits, and a two-layer projection head whose output
is L2-normalized into the contrastive embedding space. All parameters are
float64 and updates use classic SGD (momentum buffer, weight decay added to
the gradient) under a polynomial learning-rate decay.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import softmax

PARAM_NAMES = (
    "w_feat", "b_feat", "w_seg", "b_seg",
    "w_proj1", "b_proj1", "w_proj2", "b_proj2",
)


class TrainingDivergenceError(RuntimeError):
    """Raised when the training objective stops being finite."""

    def __init__(self, iteration: int, message: str = ""):
        self.iteration = iteration
        super().__init__(message or f"non-finite loss at iteration {iteration}")


@dataclass
class ForwardState:
    """Intermediate activations kept for the backward pass."""

    x: np.ndarray            # (N, F) raw features
    hidden: np.ndarray       # (N, H) tanh activations
    logits: np.ndarray       # (N, C)
    scores: np.ndarray       # (N, C) softmax
    proj_hidden: np.ndarray  # (N, H) tanh activations
    proj_raw: np.ndarray     # (N, D) pre-normalization
    norms: np.ndarray        # (N, 1)
    embeddings: np.ndarray   # (N, D) unit rows


def init_params(
    n_features: int, hidden_dim: int, embed_dim: int, n_classes: int,
    rng: np.random.Generator,
) -> dict[str, np.ndarray]:
    """Gaussian fan-in scaled weights, zero biases."""
    def w(fan_in, fan_out):
        return rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)

    return {
        "w_feat": w(n_features, hidden_dim),
        "b_feat": np.zeros(hidden_dim),
        "w_seg": w(hidden_dim, n_classes),
        "b_seg": np.zeros(n_classes),
        "w_proj1": w(hidden_dim, hidden_dim),
        "b_proj1": np.zeros(hidden_dim),
        "w_proj2": w(hidden_dim, embed_dim),
        "b_proj2": np.zeros(embed_dim),
    }


def forward(params: dict, x: np.ndarray) -> ForwardState:
    """Evaluate the network on flattened pixels (N, F)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params["w_feat"].shape[0]:
        raise ValueError(
            f"expected pixel features of shape (n, {params['w_feat'].shape[0]}), got {x.shape}"
        )
    hidden = np.tanh(x @ params["w_feat"] + params["b_feat"])
    logits = hidden @ params["w_seg"] + params["b_seg"]
    scores = softmax(logits, axis=-1)
    proj_hidden = np.tanh(hidden @ params["w_proj1"] + params["b_proj1"])
    proj_raw = proj_hidden @ params["w_proj2"] + params["b_proj2"]
    norms = np.linalg.norm(proj_raw, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("projection produced a zero vector; cannot normalize")
    embeddings = proj_raw / norms
    return ForwardState(x, hidden, logits, scores, proj_hidden, proj_raw, norms, embeddings)


def backward(
    params: dict,
    state: ForwardState,
    d_logits: np.ndarray | None,
    d_embeddings: np.ndarray | None,
) -> dict[str, np.ndarray]:
    """Parameter gradients given upstream gradients on logits and embeddings."""
    n = state.x.shape[0]
    grads = {}

    if d_embeddings is not None:
        u = state.embeddings
        # through u = v / |v|: dv = (dU - (dU . u) u) / |v|
        d_raw = (d_embeddings - (d_embeddings * u).sum(axis=1, keepdims=True) * u) / state.norms
        grads["w_proj2"] = state.proj_hidden.T @ d_raw
        grads["b_proj2"] = d_raw.sum(axis=0)
        d_ph = (d_raw @ params["w_proj2"].T) * (1.0 - state.proj_hidden**2)
        grads["w_proj1"] = state.hidden.T @ d_ph
        grads["b_proj1"] = d_ph.sum(axis=0)
        d_hidden_proj = d_ph @ params["w_proj1"].T
    else:
        grads["w_proj2"] = np.zeros_like(params["w_proj2"])
        grads["b_proj2"] = np.zeros_like(params["b_proj2"])
        grads["w_proj1"] = np.zeros_like(params["w_proj1"])
        grads["b_proj1"] = np.zeros_like(params["b_proj1"])
        d_hidden_proj = np.zeros((n, params["w_proj1"].shape[0]))

    if d_logits is not None:
        grads["w_seg"] = state.hidden.T @ d_logits
        grads["b_seg"] = d_logits.sum(axis=0)
        d_hidden_seg = d_logits @ params["w_seg"].T
    else:
        grads["w_seg"] = np.zeros_like(params["w_seg"])
        grads["b_seg"] = np.zeros_like(params["b_seg"])
        d_hidden_seg = np.zeros((n, params["w_seg"].shape[0]))

    d_hidden = (d_hidden_seg + d_hidden_proj) * (1.0 - state.hidden**2)
    grads["w_feat"] = state.x.T @ d_hidden
    grads["b_feat"] = d_hidden.sum(axis=0)
    return grads


def batch_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean pixel cross entropy over a batch, plus its logits gradient."""
    n = logits.shape[0]
    shift = logits.max(axis=1, keepdims=True)
    exp = np.exp(logits - shift)
    lse = np.log(exp.sum(axis=1)) + shift[:, 0]
    value = float(np.mean(lse - logits[np.arange(n), labels]))
    d_logits = exp / exp.sum(axis=1, keepdims=True)
    d_logits[np.arange(n), labels] -= 1.0
    return value, d_logits / n


def poly_lr(base: float, iteration: int, total: int) -> float:
    """Polynomial decay: base * (1 - iteration/total) ** 0.9."""
    if total < 1:
        raise ValueError(f"total iterations must be >= 1, got {total}")
    if not 0 <= iteration <= total:
        raise ValueError(f"iteration {iteration} outside [0, {total}]")
    return float(base * (1.0 - iteration / total) ** 0.9)


def sgd_update(
    params: dict,
    grads: dict,
    buffers: dict,
    lr: float,
    momentum: float,
    weight_decay: float,
) -> None:
    """In-place SGD step: g += wd * theta; buf = mu * buf + g; theta -= lr * buf."""
    for name in params:
        g = grads[name] + weight_decay * params[name]
        buffers[name] = momentum * buffers[name] + g
        params[name] -= lr * buffers[name]
