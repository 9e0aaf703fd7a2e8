import numpy as np
import pytest

from gmcr.core import Correspondence, Similarity
from gmcr.synthbench import sample_uniform_rotation


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_rotation(rng) -> np.ndarray:
    return sample_uniform_rotation(rng)


def random_similarity(rng, scale_range=(0.5, 4.0), trans_range=1.5) -> Similarity:
    s = rng.uniform(*scale_range)
    r = random_rotation(rng)
    t = rng.uniform(-trans_range, trans_range, size=3)
    return Similarity(float(s), r, t)


def inlier_correspondences(rng, truth: Similarity, n: int, beta: float = 0.02,
                           noise_scale: float = 1.0) -> list[Correspondence]:
    """Correspondences satisfying the model within beta (noise < beta by margin)."""
    a = rng.uniform(-0.5, 0.5, size=(n, 3))
    direction = rng.normal(size=(n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radius = rng.uniform(0.0, 0.95 * beta * noise_scale, size=(n, 1))
    b = truth.apply(a) + direction * radius
    return [Correspondence(a[i], b[i], beta) for i in range(n)]


@pytest.fixture
def rng():
    return make_rng(20240817)
