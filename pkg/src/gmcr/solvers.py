"""Closed-form estimators over inlier sets, plus the RANSAC baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .consensus import TransMeasurementSet
from .core import Correspondence, Similarity, consensus_set, correspondence_arrays
from .errors import (
    ConfigError,
    DegenerateGeometryError,
    InconsistentCliqueError,
    InsufficientInputError,
)
from .graph import Clique
from .invariants import ScaleMeasurementSet

# Slack absorbing the different roundings of the pairwise overlap test and
# the interval endpoints; real interval intersections are far wider.
_HELLY_SLACK = 1e-12


def solve_scale(measurements: ScaleMeasurementSet, clique: Clique, c: float = 1.0) -> float:
    """Midpoint of the common intersection of the clique members' intervals.

    Pairwise interval overlap implies a common point in one dimension, so a
    clique of the scale graph always has a nonempty intersection; its
    midpoint (the Chebyshev center) lies inside every member's interval.
    """
    if len(clique) == 0:
        raise InsufficientInputError("solve_scale needs a nonempty clique")
    idx = np.asarray(clique.nodes, dtype=np.int64)
    lo = measurements.s[idx] - measurements.alpha[idx] / c
    hi = measurements.s[idx] + measurements.alpha[idx] / c
    left, right = float(lo.max()), float(hi.min())
    if left > right + _HELLY_SLACK * max(1.0, abs(left)):
        raise InconsistentCliqueError(
            f"clique intervals have empty intersection: [{left}, {right}]"
        )
    return 0.5 * (left + right)


def solve_rotation_arun(tims, clique: Clique, s_hat: float) -> np.ndarray:
    """Least-squares rotation aligning s_hat * a_bar to b_bar over the clique.

    SVD of the cross-covariance with the reflection corrected, so the result
    is always a proper rotation. TIMs whose source differences are collinear
    leave the rotation unconstrained and raise.
    """
    if len(clique) == 0:
        raise InsufficientInputError("solve_rotation_arun needs a nonempty clique")
    idx = np.asarray(clique.nodes, dtype=np.int64)
    x = s_hat * tims.a_bar[idx]
    y = tims.b_bar[idx]
    h = y.T @ x
    u, sing, vt = np.linalg.svd(h)
    if sing[1] <= 1e-10 * max(sing[0], 1e-300):
        raise DegenerateGeometryError("collinear TIM directions do not determine a rotation")
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def solve_translation(measurements: TransMeasurementSet, clique: Clique) -> np.ndarray:
    """Weighted least-squares translation over the clique, weights 1/beta^2."""
    if len(clique) == 0:
        raise InsufficientInputError("solve_translation needs a nonempty clique")
    idx = np.asarray(clique.nodes, dtype=np.int64)
    w = 1.0 / (measurements.beta[idx] ** 2)
    return (w[:, None] * measurements.t[idx]).sum(axis=0) / w.sum()


def umeyama_similarity(pairs: list[tuple[np.ndarray, np.ndarray]]) -> Similarity:
    """Closed-form least-squares similarity from point pairs (a_i, b_i).

    Scale is the ratio of root-mean-square deviations from the centroids,
    rotation comes from the orthogonal Procrustes problem on the centered
    pairs (reflection corrected), and translation closes the centroids.
    Needs at least 3 pairs whose source points are not collinear.
    """
    if len(pairs) < 3:
        raise InsufficientInputError(f"need at least 3 pairs, got {len(pairs)}")
    a = np.asarray([p[0] for p in pairs], dtype=np.float64)
    b = np.asarray([p[1] for p in pairs], dtype=np.float64)
    ca = a.mean(axis=0)
    cb = b.mean(axis=0)
    a0 = a - ca
    b0 = b - cb
    var_a = float(np.einsum("ij,ij->", a0, a0))
    var_b = float(np.einsum("ij,ij->", b0, b0))
    if var_a <= 0.0 or var_b <= 0.0:
        raise DegenerateGeometryError("coincident points do not determine a similarity")
    h = b0.T @ a0
    u, sing, vt = np.linalg.svd(h)
    if sing[1] <= 1e-10 * max(sing[0], 1e-300):
        raise DegenerateGeometryError("collinear points do not determine a rotation")
    d = np.sign(np.linalg.det(u @ vt))
    r = u @ np.diag([1.0, 1.0, d]) @ vt
    s = math.sqrt(var_b / var_a)
    t = cb - s * (r @ ca)
    return Similarity(s, r, t)


@dataclass(frozen=True)
class RansacConfig:
    """RANSAC controls: adaptive stop by confidence, or a fixed round count."""

    max_iterations: int = 10000
    confidence: float = 0.99
    fixed_iterations: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if not (0.0 < self.confidence < 1.0):
            raise ConfigError("confidence must be in (0, 1)")
        if self.fixed_iterations is not None and self.fixed_iterations < 1:
            raise ConfigError("fixed_iterations must be >= 1 when set")


def _adaptive_rounds(inlier_ratio: float, confidence: float) -> int:
    """Rounds needed so an all-inlier 3-sample is drawn with the given confidence."""
    miss = 1.0 - inlier_ratio ** 3
    if miss <= 0.0:
        return 1
    if miss >= 1.0:
        return 1 << 62
    return max(1, math.ceil(math.log(1.0 - confidence) / math.log(miss)))


def ransac_register(
    corrs: list[Correspondence], cfg: RansacConfig, c: float = 1.0
) -> tuple[Similarity, list[int], int]:
    """RANSAC over 3-point minimal samples, scored by consensus-set size.

    Degenerate samples are redrawn without consuming an iteration. With
    fixed_iterations set, exactly that many sampling rounds run; otherwise
    the round count adapts to the best inlier ratio seen, capped by
    max_iterations. The best model is refit on its consensus set before
    being returned along with that set and the rounds used.
    """
    n = len(corrs)
    if n < 3:
        raise InsufficientInputError(f"RANSAC needs at least 3 correspondences, got {n}")
    rng = np.random.default_rng(cfg.seed)
    a, b, _ = correspondence_arrays(corrs)

    if cfg.fixed_iterations is not None:
        target = cfg.fixed_iterations
        adaptive = False
    else:
        target = cfg.max_iterations
        adaptive = True

    best_inliers: list[int] = []
    best_model: Similarity | None = None
    rounds = 0
    while rounds < target:
        model = None
        for _ in range(100):  # redraw degenerate samples without spending a round
            pick = rng.choice(n, size=3, replace=False)
            try:
                model = umeyama_similarity([(a[k], b[k]) for k in pick])
                break
            except DegenerateGeometryError:
                continue
        if model is None:
            break  # essentially degenerate input; keep whatever we have
        rounds += 1
        inl = consensus_set(corrs, model, c)
        if len(inl) > len(best_inliers):
            best_inliers = inl
            best_model = model
            if adaptive:
                target = min(cfg.max_iterations, _adaptive_rounds(len(inl) / n, cfg.confidence))

    if best_model is None:
        raise DegenerateGeometryError("RANSAC found no non-degenerate sample")
    if len(best_inliers) >= 3:
        try:
            best_model = umeyama_similarity([(a[k], b[k]) for k in best_inliers])
            best_inliers = consensus_set(corrs, best_model, c)
        except DegenerateGeometryError:
            pass  # keep the minimal-sample model
    return best_model, best_inliers, rounds
