"""Geometric primitives, similarity transforms, and error metrics.

Conventions used throughout the package:

- points and translations are float64 numpy arrays of shape (3,), meters;
- rotations are proper orthogonal 3x3 float64 matrices;
- a similarity transform maps p to s * R @ p + t;
- a correspondence (a, b) with noise bound beta is an inlier of a transform
  when the normalized squared residual (1/beta^2) * ||b - s*R*a - t||^2 is
  at or below 1/c^2 for the inlier threshold parameter c > 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometryError, InsufficientInputError

ORTHONORMALITY_TOL = 1e-9


def as_vec3(x) -> np.ndarray:
    """Return x as a float64 array of shape (3,) with finite components."""
    v = np.asarray(x, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"vector has non-finite components: {v}")
    return v


def is_rotation(m: np.ndarray, tol: float = ORTHONORMALITY_TOL) -> bool:
    """True iff m is orthonormal (Frobenius) and det(m) = +1 within tol."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        return False
    err = np.linalg.norm(m.T @ m - np.eye(3))
    return err <= tol and abs(np.linalg.det(m) - 1.0) <= tol


def require_rotation(m: np.ndarray, tol: float = ORTHONORMALITY_TOL) -> np.ndarray:
    """Validate and return m as a float64 rotation matrix."""
    m = np.asarray(m, dtype=np.float64)
    if not is_rotation(m, tol):
        raise ValueError("matrix is not a proper rotation within tolerance")
    return m


def rotation_from_axis_angle(axis, angle: float) -> np.ndarray:
    """Rodrigues formula: rotation by `angle` radians about `axis`."""
    u = as_vec3(axis)
    n = np.linalg.norm(u)
    if n == 0.0:
        raise DegenerateGeometryError("rotation axis has zero norm")
    u = u / n
    k = np.array([[0.0, -u[2], u[1]], [u[2], 0.0, -u[0]], [-u[1], u[0], 0.0]])
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def rotation_from_quaternion(q) -> np.ndarray:
    """Rotation matrix of a quaternion (w, x, y, z); q need not be normalized."""
    q = np.asarray(q, dtype=np.float64).reshape(4)
    n = np.linalg.norm(q)
    if n == 0.0:
        raise DegenerateGeometryError("zero quaternion")
    w, x, y, z = q / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quaternion_from_rotation(m: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) with w >= 0 for a rotation matrix."""
    m = np.asarray(m, dtype=np.float64)
    # Shepperd's method: pick the largest diagonal combination for stability.
    t = np.trace(m)
    if t > 0:
        r = np.sqrt(1.0 + t)
        w = 0.5 * r
        x = (m[2, 1] - m[1, 2]) / (2.0 * r)
        y = (m[0, 2] - m[2, 0]) / (2.0 * r)
        z = (m[1, 0] - m[0, 1]) / (2.0 * r)
    else:
        i = int(np.argmax(np.diag(m)))
        j, k = (i + 1) % 3, (i + 2) % 3
        r = np.sqrt(1.0 + m[i, i] - m[j, j] - m[k, k])
        q = np.empty(4)
        q[1 + i] = 0.5 * r
        q[0] = (m[k, j] - m[j, k]) / (2.0 * r)
        q[1 + j] = (m[j, i] + m[i, j]) / (2.0 * r)
        q[1 + k] = (m[k, i] + m[i, k]) / (2.0 * r)
        w, x, y, z = q
    q = np.array([w, x, y, z])
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


@dataclass(frozen=True, eq=False)
class Similarity:
    """A similarity transform p -> s * r @ p + t with s > 0."""

    s: float
    r: np.ndarray = field(repr=False)
    t: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.s) and self.s > 0):
            raise ValueError(f"scale must be positive and finite, got {self.s}")
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "r", require_rotation(self.r))
        object.__setattr__(self, "t", as_vec3(self.t))

    @staticmethod
    def identity() -> "Similarity":
        return Similarity(1.0, np.eye(3), np.zeros(3))

    def apply(self, p: np.ndarray) -> np.ndarray:
        """Transform a point (3,) or a stack of points (N, 3)."""
        p = np.asarray(p, dtype=np.float64)
        return self.s * p @ self.r.T + self.t

    def compose(self, other: "Similarity") -> "Similarity":
        """Transform equal to applying `other` first, then self."""
        return Similarity(
            self.s * other.s, self.r @ other.r, self.s * self.r @ other.t + self.t
        )

    def inverse(self) -> "Similarity":
        rt = self.r.T
        return Similarity(1.0 / self.s, rt, -(rt @ self.t) / self.s)


@dataclass(frozen=True, eq=False)
class Correspondence:
    """A putative source/target point pair with its noise bound (meters)."""

    a: np.ndarray
    b: np.ndarray
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "a", as_vec3(self.a))
        object.__setattr__(self, "b", as_vec3(self.b))
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"noise bound must be positive, got {self.beta}")
        object.__setattr__(self, "beta", float(self.beta))


def correspondence_arrays(corrs: list[Correspondence]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Columnar view (A, B, beta) of a correspondence list: (N,3), (N,3), (N,)."""
    a = np.array([c.a for c in corrs], dtype=np.float64).reshape(-1, 3)
    b = np.array([c.b for c in corrs], dtype=np.float64).reshape(-1, 3)
    beta = np.array([c.beta for c in corrs], dtype=np.float64)
    return a, b, beta


def apply(transform: Similarity, p: np.ndarray) -> np.ndarray:
    """Functional form of Similarity.apply."""
    return transform.apply(p)


def residual(corr: Correspondence, transform: Similarity) -> float:
    """Normalized squared residual (1/beta^2) * ||b - s*R*a - t||^2."""
    d = corr.b - transform.apply(corr.a)
    return float(d @ d) / (corr.beta * corr.beta)


def consensus_set(corrs: list[Correspondence], transform: Similarity, c: float = 1.0) -> list[int]:
    """Indices whose normalized residual is within the inlier threshold 1/c^2."""
    if not corrs:
        raise InsufficientInputError("consensus_set needs at least one correspondence")
    a, b, beta = correspondence_arrays(corrs)
    d = b - transform.apply(a)
    r = np.einsum("ij,ij->i", d, d) / (beta * beta)
    return [int(i) for i in np.flatnonzero(r <= 1.0 / (c * c))]


def angle_between(u: np.ndarray, v: np.ndarray) -> float:
    """Angle in [0, pi] between two nonzero vectors.

    Uses atan2(||u x v||, u . v), which stays accurate for nearly parallel
    and nearly antiparallel inputs where arccos of the dot product does not.
    """
    u = np.asarray(u, dtype=np.float64).reshape(3)
    v = np.asarray(v, dtype=np.float64).reshape(3)
    if not (np.any(u != 0.0) and np.any(v != 0.0)):
        raise DegenerateGeometryError("angle_between requires nonzero vectors")
    cx = u[1] * v[2] - u[2] * v[1]
    cy = u[2] * v[0] - u[0] * v[2]
    cz = u[0] * v[1] - u[1] * v[0]
    cross = np.sqrt(cx * cx + cy * cy + cz * cz)
    dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
    return float(np.arctan2(cross, dot))


def geodesic_rotation_error(r_hat: np.ndarray, r_true: np.ndarray) -> float:
    """|arccos((tr(r_hat^T r_true) - 1) / 2)|, the geodesic distance on SO(3)."""
    m = np.asarray(r_hat, dtype=np.float64).T @ np.asarray(r_true, dtype=np.float64)
    cos = np.clip((np.trace(m) - 1.0) / 2.0, -1.0, 1.0)
    return float(abs(np.arccos(cos)))


def add_error(t_hat: Similarity, t_true: Similarity, points: np.ndarray) -> float:
    """Mean distance between points transformed by the estimate and the truth."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] == 0:
        raise InsufficientInputError("add_error needs at least one point")
    d = t_hat.apply(pts) - t_true.apply(pts)
    return float(np.mean(np.linalg.norm(d, axis=1)))
