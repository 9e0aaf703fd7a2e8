"""Translation- and rotation-invariant measurements.

Differencing two correspondences cancels the translation: for pairs i < j,
a_bar = a_j - a_i and b_bar = b_j - b_i obey b_bar = s * R @ a_bar up to a
noise bound delta = beta_j + beta_i (triangle inequality) whenever both pairs
are inliers. Taking norms additionally cancels the rotation and yields scalar
scale measurements s_k = ||b_bar|| / ||a_bar|| with relative bound
alpha_k = delta_k / ||a_bar||.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Correspondence, correspondence_arrays
from .errors import ConfigError, InsufficientInputError

DEFAULT_MIN_TIM_NORM = 1e-6


@dataclass(frozen=True, eq=False)
class Tim:
    """One translation-invariant measurement (difference of two correspondences)."""

    i: int
    j: int
    a_bar: np.ndarray
    b_bar: np.ndarray
    delta: float


@dataclass(frozen=True, eq=False)
class TimSet:
    """Columnar batch of translation-invariant measurements.

    Arrays: i, j (K,) int64 with i < j; a_bar, b_bar (K, 3); delta (K,).
    """

    i: np.ndarray
    j: np.ndarray
    a_bar: np.ndarray
    b_bar: np.ndarray
    delta: np.ndarray

    def __len__(self) -> int:
        return int(self.i.shape[0])

    def __getitem__(self, k: int) -> Tim:
        return Tim(
            int(self.i[k]), int(self.j[k]),
            self.a_bar[k].copy(), self.b_bar[k].copy(), float(self.delta[k]),
        )

    def subset(self, keep: np.ndarray) -> "TimSet":
        """Row subset; `keep` is an index array or boolean mask."""
        return TimSet(self.i[keep], self.j[keep], self.a_bar[keep],
                      self.b_bar[keep], self.delta[keep])


def build_tims(
    corrs: list[Correspondence],
    mode: str = "all_pairs",
    limit: int | None = None,
    seed: int = 0,
) -> TimSet:
    """Build pairwise difference measurements over all index pairs i < j.

    mode "all_pairs" emits all N*(N-1)/2 pairs in row-major order
    ((0,1), (0,2), ..., (1,2), ...). mode "complete_limit" subsamples
    `limit` pairs uniformly without replacement (seeded) when the full
    count exceeds the limit; this is a memory guard for large inputs and
    leaves smaller inputs untouched.
    """
    n = len(corrs)
    if n < 2:
        raise InsufficientInputError(f"need at least 2 correspondences, got {n}")
    if mode not in ("all_pairs", "complete_limit"):
        raise ConfigError(f"unknown TIM mode {mode!r}")
    if mode == "complete_limit" and (limit is None or limit < 1):
        raise ConfigError("complete_limit mode requires a positive limit")

    a, b, beta = correspondence_arrays(corrs)
    ii, jj = np.triu_indices(n, k=1)
    if mode == "complete_limit" and ii.shape[0] > limit:
        rng = np.random.default_rng(seed)
        pick = np.sort(rng.choice(ii.shape[0], size=limit, replace=False))
        ii, jj = ii[pick], jj[pick]
    return TimSet(
        i=ii.astype(np.int64),
        j=jj.astype(np.int64),
        a_bar=a[jj] - a[ii],
        b_bar=b[jj] - b[ii],
        delta=beta[jj] + beta[ii],
    )


@dataclass(frozen=True)
class ScaleMeasurement:
    """Scalar scale ratio with its relative noise bound."""

    tim_index: int
    s: float
    alpha: float


@dataclass(frozen=True, eq=False)
class ScaleMeasurementSet:
    """Columnar batch of scale measurements; tim_index maps back into a TimSet."""

    tim_index: np.ndarray
    s: np.ndarray
    alpha: np.ndarray

    def __len__(self) -> int:
        return int(self.s.shape[0])

    def __getitem__(self, k: int) -> ScaleMeasurement:
        return ScaleMeasurement(int(self.tim_index[k]), float(self.s[k]), float(self.alpha[k]))


def scale_measurements(tims: TimSet, min_norm: float = DEFAULT_MIN_TIM_NORM) -> ScaleMeasurementSet:
    """One scale measurement per TIM whose source difference norm is usable.

    TIMs with ||a_bar|| < min_norm are dropped: their relative bound alpha
    diverges and the ratio carries no information. Callers can report the
    drop count as len(tims) - len(result).
    """
    na = np.linalg.norm(tims.a_bar, axis=1)
    nb = np.linalg.norm(tims.b_bar, axis=1)
    keep = np.flatnonzero(na >= min_norm)
    return ScaleMeasurementSet(
        tim_index=keep.astype(np.int64),
        s=nb[keep] / na[keep],
        alpha=tims.delta[keep] / na[keep],
    )
