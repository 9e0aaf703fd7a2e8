"""Pairwise consensus predicates for scale, rotation, and translation.

Each predicate answers: can these two measurements be inliers of one common
parameter value? Applied to all pairs, the predicates define the adjacency
of a consensus graph whose maximum clique approximates the maximum consensus
set. Scalar predicates operate on single measurements; the *_matrix builders
produce the full boolean adjacency with identical arithmetic, vectorized.

Threshold convention: an inlier satisfies its residual bound scaled by 1/c,
so the scale interval is s_k +/- alpha_k / c, the rotation chord bound is
delta_k / c, and translation spheres have radius beta_i / c. With the common
choice c = 1 this matches plain bounded-noise intervals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Correspondence, Similarity, angle_between, correspondence_arrays
from .errors import ConfigError, DegenerateGeometryError
from .invariants import ScaleMeasurement, Tim, TimSet

ROTATION_MODES = ("tight", "paper_band")


# ---------------------------------------------------------------------------
# Scale
# ---------------------------------------------------------------------------

def scale_consensus(k: ScaleMeasurement, j: ScaleMeasurement, c: float = 1.0) -> bool:
    """True iff the intervals [s - alpha/c, s + alpha/c] of k and j intersect."""
    return abs(k.s - j.s) <= (k.alpha + j.alpha) / c


def scale_consensus_matrix(s: np.ndarray, alpha: np.ndarray, c: float = 1.0,
                           block: int = 512) -> np.ndarray:
    """Boolean adjacency over scale measurements; diagonal cleared.

    Row-blocked so temporaries stay at block * n instead of n * n.
    """
    n = s.shape[0]
    adj = np.zeros((n, n), dtype=bool)
    for r0 in range(0, n, block):
        r1 = min(r0 + block, n)
        adj[r0:r1] = np.abs(s[r0:r1, None] - s[None, :]) <= (alpha[r0:r1, None] + alpha[None, :]) / c
    np.fill_diagonal(adj, False)
    return adj


# ---------------------------------------------------------------------------
# Rotation
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RotMeasurement:
    """Unit direction pair admitting rotations within a cone half-angle gamma."""

    tim_index: int
    a_dir: np.ndarray
    b_dir: np.ndarray
    gamma: float


@dataclass(frozen=True, eq=False)
class RotMeasurementSet:
    """Columnar batch of rotation measurements (all feasible)."""

    tim_index: np.ndarray
    a_dir: np.ndarray
    b_dir: np.ndarray
    gamma: np.ndarray

    def __len__(self) -> int:
        return int(self.gamma.shape[0])

    def __getitem__(self, k: int) -> RotMeasurement:
        return RotMeasurement(
            int(self.tim_index[k]), self.a_dir[k].copy(),
            self.b_dir[k].copy(), float(self.gamma[k]),
        )


def rotation_gamma(tim: Tim, s_hat: float, c: float = 1.0) -> float | None:
    """Cone half-angle admitting TIM k at scale s_hat, or None when infeasible.

    The chord bound ||b_bar - s_hat * R @ a_bar|| <= delta / c constrains the
    angle between b_bar and R @ a_bar; the law of cosines converts the chord
    radius into the half-angle gamma such that both bounds admit exactly the
    same set of rotations. No rotation works when the chord radius cannot
    bridge the norm mismatch |  ||b_bar|| - s_hat * ||a_bar||  |.
    """
    na = float(np.linalg.norm(tim.a_bar))
    nb = float(np.linalg.norm(tim.b_bar))
    if na == 0.0 or nb == 0.0:
        raise DegenerateGeometryError("rotation_gamma requires nonzero difference vectors")
    bound = tim.delta / c
    sa = s_hat * na
    if bound < abs(nb - sa):
        return None
    cos = (nb * nb + sa * sa - bound * bound) / (2.0 * sa * nb)
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


def rotation_measurements(
    tims: TimSet, s_hat: float, c: float = 1.0, min_norm: float = 0.0
) -> RotMeasurementSet:
    """Feasible rotation measurements for a TIM batch at scale s_hat.

    TIMs with either difference norm below min_norm (direction undefined)
    and TIMs no rotation can admit are dropped; tim_index records the
    surviving rows of `tims`.
    """
    na = np.linalg.norm(tims.a_bar, axis=1)
    nb = np.linalg.norm(tims.b_bar, axis=1)
    ok = (na >= max(min_norm, np.finfo(np.float64).tiny)) & (nb >= max(min_norm, np.finfo(np.float64).tiny))
    bound = tims.delta / c
    sa = s_hat * na
    with np.errstate(invalid="ignore", divide="ignore"):
        feasible = ok & (bound >= np.abs(nb - sa))
        cos = (nb * nb + sa * sa - bound * bound) / (2.0 * sa * nb)
    keep = np.flatnonzero(feasible)
    return RotMeasurementSet(
        tim_index=keep.astype(np.int64),
        a_dir=tims.a_bar[keep] / na[keep, None],
        b_dir=tims.b_bar[keep] / nb[keep, None],
        gamma=np.arccos(np.clip(cos[keep], -1.0, 1.0)),
    )


def rotation_consensus(i: RotMeasurement, k: RotMeasurement, mode: str = "tight") -> bool:
    """True iff some rotation can admit both measurements.

    The admissible region for each measurement is a cap of half-angle gamma
    around its target direction, azimuthally swept by the unknown roll of the
    aligning rotation; overlap of those regions reduces to comparing the
    angular separations phi_a (source directions) and phi_b (target
    directions). "tight" uses |phi_a - phi_b| <= gamma_i + gamma_k, the exact
    pairwise necessary condition. "paper_band" widens one side by the swept
    zone of the other (axis wobble 2*gamma + cap gamma), symmetrized:
    |phi_a - phi_b| <= min(gamma_i + 3*gamma_k, gamma_k + 3*gamma_i).
    """
    if mode not in ROTATION_MODES:
        raise ConfigError(f"unknown rotation consensus mode {mode!r}")
    phi_a = angle_between(i.a_dir, k.a_dir)
    phi_b = angle_between(i.b_dir, k.b_dir)
    if mode == "tight":
        bound = i.gamma + k.gamma
    else:
        bound = min(i.gamma + 3.0 * k.gamma, k.gamma + 3.0 * i.gamma)
    return abs(phi_a - phi_b) <= bound


def _pairwise_angles(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Angles between all rows of u (m,3) and all rows of v (n,3) -> (m,n).

    Componentwise cross/dot written to match angle_between exactly.
    """
    u0, u1, u2 = u[:, 0, None], u[:, 1, None], u[:, 2, None]
    v0, v1, v2 = v[None, :, 0], v[None, :, 1], v[None, :, 2]
    cx = u1 * v2 - u2 * v1
    cy = u2 * v0 - u0 * v2
    cz = u0 * v1 - u1 * v0
    cross = np.sqrt(cx * cx + cy * cy + cz * cz)
    dot = u0 * v0 + u1 * v1 + u2 * v2
    return np.arctan2(cross, dot)


def rotation_consensus_matrix(
    meas: RotMeasurementSet, mode: str = "tight", block: int = 256
) -> np.ndarray:
    """Boolean adjacency over rotation measurements; diagonal cleared.

    Row-blocked to bound peak memory at block * n temporaries.
    """
    if mode not in ROTATION_MODES:
        raise ConfigError(f"unknown rotation consensus mode {mode!r}")
    n = len(meas)
    g = meas.gamma
    adj = np.zeros((n, n), dtype=bool)
    for r0 in range(0, n, block):
        r1 = min(r0 + block, n)
        phi_a = _pairwise_angles(meas.a_dir[r0:r1], meas.a_dir)
        phi_b = _pairwise_angles(meas.b_dir[r0:r1], meas.b_dir)
        gi = g[r0:r1, None]
        gk = g[None, :]
        if mode == "tight":
            bound = gi + gk
        else:
            bound = np.minimum(gi + 3.0 * gk, gk + 3.0 * gi)
        adj[r0:r1] = np.abs(phi_a - phi_b) <= bound
    np.fill_diagonal(adj, False)
    return adj


# ---------------------------------------------------------------------------
# Translation
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TransMeasurement:
    """A translation vote b - s_hat * R_hat @ a with sphere radius beta / c."""

    corr_index: int
    t: np.ndarray
    beta: float


@dataclass(frozen=True, eq=False)
class TransMeasurementSet:
    """Columnar batch of translation measurements."""

    corr_index: np.ndarray
    t: np.ndarray
    beta: np.ndarray

    def __len__(self) -> int:
        return int(self.beta.shape[0])

    def __getitem__(self, k: int) -> TransMeasurement:
        return TransMeasurement(int(self.corr_index[k]), self.t[k].copy(), float(self.beta[k]))


def translation_measurements(
    corrs: list[Correspondence], s_hat: float, r_hat: np.ndarray,
    indices: np.ndarray | None = None,
) -> TransMeasurementSet:
    """One translation vote per correspondence (or per selected index)."""
    a, b, beta = correspondence_arrays(corrs)
    if indices is None:
        indices = np.arange(len(corrs), dtype=np.int64)
    else:
        indices = np.asarray(indices, dtype=np.int64)
    r_hat = np.asarray(r_hat, dtype=np.float64)
    t = b[indices] - s_hat * (a[indices] @ r_hat.T)
    return TransMeasurementSet(corr_index=indices, t=t, beta=beta[indices])


def translation_consensus(i: TransMeasurement, j: TransMeasurement, c: float = 1.0) -> bool:
    """True iff the spheres of radius beta/c around the two votes intersect."""
    dx = j.t[0] - i.t[0]
    dy = j.t[1] - i.t[1]
    dz = j.t[2] - i.t[2]
    dist = np.sqrt(dx * dx + dy * dy + dz * dz)
    return bool(dist <= (j.beta + i.beta) / c)


def translation_consensus_matrix(meas: TransMeasurementSet, c: float = 1.0) -> np.ndarray:
    """Boolean adjacency over translation measurements; diagonal cleared."""
    t = meas.t
    dx = t[None, :, 0] - t[:, None, 0]
    dy = t[None, :, 1] - t[:, None, 1]
    dz = t[None, :, 2] - t[:, None, 2]
    dist = np.sqrt(dx * dx + dy * dy + dz * dz)
    adj = dist <= (meas.beta[None, :] + meas.beta[:, None]) / c
    np.fill_diagonal(adj, False)
    return adj


def consistency_matrix(
    corrs: list[Correspondence], s_hat: float, c: float = 1.0
) -> np.ndarray:
    """Boolean adjacency of the known-scale consistency relation.

    Nodes are correspondences; i and j are connected when their pairwise
    length ratio agrees with s_hat within the summed noise bounds:
    |  ||b_j - b_i|| - s_hat * ||a_j - a_i||  | <= (beta_i + beta_j) / c.
    """
    a, b, beta = correspondence_arrays(corrs)
    da = np.linalg.norm(a[None, :, :] - a[:, None, :], axis=2)
    db = np.linalg.norm(b[None, :, :] - b[:, None, :], axis=2)
    adj = np.abs(db - s_hat * da) <= (beta[None, :] + beta[:, None]) / c
    np.fill_diagonal(adj, False)
    return adj


def transform_from_stages(s_hat: float, r_hat: np.ndarray, t_hat: np.ndarray) -> Similarity:
    """Assemble the final similarity from per-stage estimates."""
    return Similarity(s_hat, r_hat, t_hat)
