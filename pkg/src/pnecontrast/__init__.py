"""Pixel-wise positive-negative-equal contrastive loss engine.

Losses and analytic gradients over (anchor, positives, negatives) embedding
sets, the anchor-group sampling strategies that feed them, a synthetic-scene
toy trainer with an sklearn-style estimator, and embedding-quality metrics.
"""

from .config import ConfigError, RunConfig, TrainConfig, config_to_dict, load_config_file, parse_config
from .core import argmax_predict, dot_similarity, l2_normalize, softmax
from .estimator import ContrastiveSegmenter
from .experiment import RunArtifacts, execute_run, run_experiment
from .gradcheck import (
    BalanceReport,
    GradCheckReport,
    balance_diagnostic,
    finite_diff_check,
    finite_diff_gradients,
    grad_ce,
    grad_nce,
    grad_pne,
    run_gradient_suite,
    run_oracle_suite,
)
from .losses import (
    ContrastConfig,
    CrossEntropyResult,
    GroupedLossResult,
    LossResult,
    combined_loss,
    grouped_contrast_loss,
    nce_full_loss,
    nce_loss,
    per_positive_weights,
    pixel_cross_entropy,
    pne_full_loss,
    pne_group_loss,
    pne_loss,
)
from .metrics import ExperimentReport, alignment, dump_embeddings, miou, uniformity
from .model import TrainingDivergenceError, poly_lr
from .sampling import (
    PixelPartition,
    SampleSets,
    SamplingConfig,
    build_sample_sets,
    cap_anchors,
    draw_samples,
    partition_pixels,
)
from .scenes import SceneSpec, make_scene, make_scenes, separable_spec

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "RunConfig",
    "TrainConfig",
    "config_to_dict",
    "load_config_file",
    "parse_config",
    "argmax_predict",
    "dot_similarity",
    "l2_normalize",
    "softmax",
    "ContrastiveSegmenter",
    "RunArtifacts",
    "execute_run",
    "run_experiment",
    "BalanceReport",
    "GradCheckReport",
    "balance_diagnostic",
    "finite_diff_check",
    "finite_diff_gradients",
    "grad_ce",
    "grad_nce",
    "grad_pne",
    "run_gradient_suite",
    "run_oracle_suite",
    "ContrastConfig",
    "CrossEntropyResult",
    "GroupedLossResult",
    "LossResult",
    "combined_loss",
    "grouped_contrast_loss",
    "nce_full_loss",
    "nce_loss",
    "per_positive_weights",
    "pixel_cross_entropy",
    "pne_full_loss",
    "pne_group_loss",
    "pne_loss",
    "ExperimentReport",
    "alignment",
    "dump_embeddings",
    "miou",
    "uniformity",
    "TrainingDivergenceError",
    "poly_lr",
    "PixelPartition",
    "SampleSets",
    "SamplingConfig",
    "build_sample_sets",
    "cap_anchors",
    "draw_samples",
    "partition_pixels",
    "SceneSpec",
    "make_scene",
    "make_scenes",
    "separable_spec",
]
