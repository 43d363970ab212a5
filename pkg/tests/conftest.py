import numpy as np
import pytest

from pnecontrast import argmax_predict, l2_normalize, softmax


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def unit(v):
    return l2_normalize(np.asarray(v, dtype=np.float64))


def random_unit_rows(rng, n, dim):
    return l2_normalize(rng.standard_normal((n, dim)))


def random_maps(rng, height, width, n_classes):
    """Random (labels, preds, scores) with preds = argmax of the scores."""
    labels = rng.integers(0, n_classes, size=(height, width))
    scores = softmax(rng.normal(0.0, 1.5, size=(height, width, n_classes)), axis=-1)
    preds = argmax_predict(scores)
    return labels, preds, scores
