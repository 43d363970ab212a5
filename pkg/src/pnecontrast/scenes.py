"""Synthetic confusable scenes: blocky label layouts over Gaussian features.

A scene is a Voronoi patchwork of class regions. Each pixel's raw feature
vector is drawn from its class's Gaussian; classes listed in a confusion
pair additionally share a mixture component near the midpoint of their
means, so a controllable fraction of pixels is inherently hard to classify.
The default spec is the canonical confusable benchmark used throughout the
test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import check_random_state

ConfusionPairs = tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class SceneSpec:
    """Shape, class-conditional Gaussians, and confusion structure.

    Class means sit on scaled coordinate axes (``class_separation`` apart
    from the origin) with isotropic ``noise_std`` spread; derive them via
    :meth:`class_means` / :meth:`class_variances`. A pixel of a confused
    class is hard with probability ``confusion_rate``: its feature is drawn
    from a displaced component with spread ``confusion_std``. The component
    sits ``confusion_swap`` of the way from the pair midpoint toward the
    OTHER class's mean, plus a ``confusion_margin`` offset along a
    pair-specific axis unused by any class mean. At swap 1 the hard pixels
    of each class land next to the opposite class's cluster and only the
    offset axis tells them apart, with the rule inverted between the two
    regions, so no linear boundary separates the pair; at swap 0 and zero
    margin both classes share one midpoint component and become
    indistinguishable.

    Independently, a further ``ambiguity_rate`` fraction of each confused
    class is drawn from a component both classes of the pair share exactly
    (the pair midpoint, spread ``confusion_std``). Those pixels are
    irreducibly ambiguous: they keep generating misclassified anchors and
    low-confidence correct pixels no matter how well the model trains.
    """

    height: int = 32
    width: int = 32
    n_classes: int = 4
    n_features: int = 8
    class_separation: float = 2.2
    noise_std: float = 0.8
    confusion_pairs: ConfusionPairs = ((0, 1), (2, 3))
    confusion_rate: float = 0.25
    confusion_swap: float = 1.0
    confusion_margin: float = 1.5
    confusion_std: float = 0.3
    ambiguity_rate: float = 0.25
    n_regions: int = 12
    seed: int = 0

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError("height and width must be >= 1")
        if self.n_classes < 2:
            raise ValueError(f"n_classes must be >= 2, got {self.n_classes}")
        if self.n_features < 1:
            raise ValueError(f"n_features must be >= 1, got {self.n_features}")
        for name in ("class_separation", "noise_std", "confusion_margin", "confusion_std"):
            val = getattr(self, name)
            if not np.isfinite(val) or val < 0:
                raise ValueError(f"{name} must be a nonnegative real, got {val}")
        if not 0.0 <= self.confusion_rate <= 1.0:
            raise ValueError(f"confusion_rate must be in [0, 1], got {self.confusion_rate}")
        if not 0.0 <= self.confusion_swap <= 1.0:
            raise ValueError(f"confusion_swap must be in [0, 1], got {self.confusion_swap}")
        if not 0.0 <= self.ambiguity_rate <= 1.0:
            raise ValueError(f"ambiguity_rate must be in [0, 1], got {self.ambiguity_rate}")
        if self.n_regions < 1:
            raise ValueError(f"n_regions must be >= 1, got {self.n_regions}")
        object.__setattr__(
            self, "confusion_pairs", tuple(tuple(int(c) for c in p) for p in self.confusion_pairs)
        )
        seen = set()
        for pair in self.confusion_pairs:
            if len(pair) != 2 or pair[0] == pair[1]:
                raise ValueError(f"confusion pair {pair} must name two distinct classes")
            for c in pair:
                if not 0 <= c < self.n_classes:
                    raise ValueError(f"confusion pair class {c} out of range")
                if c in seen:
                    raise ValueError(f"class {c} appears in more than one confusion pair")
                seen.add(c)
        if self.confusion_pairs and self.confusion_margin > 0:
            needed = self.n_classes + len(self.confusion_pairs)
            if self.n_features < needed:
                raise ValueError(
                    f"n_features must be >= {needed} to host the confusion offset axes"
                )

    def class_means(self) -> np.ndarray:
        """(n_classes, n_features) means on scaled coordinate axes."""
        means = np.zeros((self.n_classes, self.n_features))
        for c in range(self.n_classes):
            axis = c % self.n_features
            means[c, axis] = self.class_separation * (1 + c // self.n_features)
        return means

    def class_variances(self) -> np.ndarray:
        """(n_classes, n_features) diagonal covariances (isotropic)."""
        return np.full((self.n_classes, self.n_features), self.noise_std**2)

    def confusion_axis(self, pair_index: int) -> np.ndarray:
        """Unit vector of the offset axis assigned to the given pair."""
        axis = np.zeros(self.n_features)
        axis[(self.n_classes + pair_index) % self.n_features] = 1.0
        return axis


def separable_spec(**overrides) -> SceneSpec:
    """A spec with no confusion structure and wide class separation."""
    base = dict(
        class_separation=4.0, noise_std=0.25, confusion_pairs=(), confusion_rate=0.0
    )
    base.update(overrides)
    return SceneSpec(**base)


def _voronoi_labels(spec: SceneSpec, rng: np.random.Generator) -> np.ndarray:
    centers = rng.uniform(0, [spec.height, spec.width], size=(spec.n_regions, 2))
    center_classes = np.arange(spec.n_regions) % spec.n_classes
    rng.shuffle(center_classes)
    rows, cols = np.mgrid[0 : spec.height, 0 : spec.width]
    grid = np.stack([rows.ravel(), cols.ravel()], axis=1).astype(np.float64)
    d2 = ((grid[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    nearest = np.argmin(d2, axis=1)
    return center_classes[nearest].reshape(spec.height, spec.width).astype(np.int64)


def make_scene(spec: SceneSpec, rng=None) -> tuple[np.ndarray, np.ndarray]:
    """Generate one scene: (features (H, W, F), labels (H, W)).

    Deterministic given the RNG state; ``rng=None`` seeds from ``spec.seed``.
    """
    if np.any(~np.isfinite(spec.class_variances())) or np.any(spec.class_variances() < 0):
        raise ValueError("class variances must be finite and nonnegative")
    rng = check_random_state(spec.seed if rng is None else rng)

    labels = _voronoi_labels(spec, rng)
    means = spec.class_means()
    stds = np.sqrt(spec.class_variances())

    mean_map = means[labels]                      # (H, W, F)
    std_map = stds[labels]

    if spec.confusion_pairs:
        hard_draw = rng.uniform(size=labels.shape)
        ambiguous_draw = rng.uniform(size=labels.shape)
        for pair_index, (a, b) in enumerate(spec.confusion_pairs):
            midpoint = (means[a] + means[b]) / 2.0
            offset = spec.confusion_margin * spec.confusion_axis(pair_index)
            for cls, other in ((a, b), (b, a)):
                in_class = labels == cls
                hard = in_class & (hard_draw < spec.confusion_rate)
                if hard.any():
                    center = midpoint + spec.confusion_swap * (means[other] - midpoint)
                    mean_map[hard] = center + offset
                    std_map[hard] = spec.confusion_std
                ambiguous = in_class & ~hard & (ambiguous_draw < spec.ambiguity_rate)
                if ambiguous.any():
                    mean_map[ambiguous] = midpoint
                    std_map[ambiguous] = spec.confusion_std

    noise = rng.standard_normal(mean_map.shape)
    features = mean_map + std_map * noise
    return features, labels


def make_scenes(spec: SceneSpec, n_scenes: int, rng=None) -> tuple[np.ndarray, np.ndarray]:
    """Stack ``n_scenes`` independent scenes: ((n, H, W, F), (n, H, W))."""
    if n_scenes < 1:
        raise ValueError(f"n_scenes must be >= 1, got {n_scenes}")
    rng = check_random_state(spec.seed if rng is None else rng)
    features, labels = zip(*(make_scene(spec, rng) for _ in range(n_scenes)))
    return np.stack(features), np.stack(labels)
