import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmcr.core import (
    Correspondence,
    Similarity,
    add_error,
    angle_between,
    apply,
    consensus_set,
    geodesic_rotation_error,
    quaternion_from_rotation,
    residual,
    rotation_from_axis_angle,
    rotation_from_quaternion,
)
from gmcr.errors import DegenerateGeometryError, InsufficientInputError

from conftest import inlier_correspondences, make_rng, random_rotation, random_similarity


class TestApply:
    def test_identity(self):
        p = np.array([1.0, 2.0, 3.0])
        assert np.array_equal(apply(Similarity.identity(), p), p)

    def test_axis_aligned(self):
        t = Similarity(2.0, np.eye(3), np.array([1.0, 0.0, 0.0]))
        assert np.allclose(apply(t, np.array([1.0, 0.0, 0.0])), [3.0, 0.0, 0.0])

    def test_matches_homogeneous_matrix_composition(self, rng):
        # Oracle: compose the equivalent 4x4 matrix and multiply.
        for _ in range(50):
            t = random_similarity(rng)
            p = rng.uniform(-2, 2, size=3)
            m = np.eye(4)
            m[:3, :3] = t.s * t.r
            m[:3, 3] = t.t
            expected = (m @ np.append(p, 1.0))[:3]
            assert np.allclose(apply(t, p), expected, atol=1e-12, rtol=0)

    def test_batch_matches_single(self, rng):
        t = random_similarity(rng)
        pts = rng.uniform(-1, 1, size=(7, 3))
        batch = t.apply(pts)
        for i in range(7):
            assert np.allclose(batch[i], t.apply(pts[i]), atol=1e-15)


class TestResidual:
    def test_exact_point_is_zero(self, rng):
        t = random_similarity(rng)
        a = rng.uniform(-1, 1, size=3)
        corr = Correspondence(a, t.apply(a), beta=0.3)
        assert residual(corr, t) == 0.0

    def test_unit_displacement_normalizes_to_one(self, rng):
        t = random_similarity(rng)
        a = rng.uniform(-1, 1, size=3)
        beta = 0.07
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        corr = Correspondence(a, t.apply(a) + beta * v, beta=beta)
        assert residual(corr, t) == pytest.approx(1.0, abs=1e-12)

    def test_matches_direct_formula(self, rng):
        for _ in range(30):
            t = random_similarity(rng)
            a = rng.uniform(-1, 1, size=3)
            b = rng.uniform(-1, 1, size=3)
            beta = rng.uniform(0.01, 0.5)
            corr = Correspondence(a, b, beta)
            d = b - (t.s * t.r @ a + t.t)
            assert residual(corr, t) == pytest.approx(float(d @ d) / beta**2, rel=1e-12)

    def test_invariant_under_rigid_conjugation(self, rng):
        # Moving both clouds by a rigid transform g and conjugating the
        # estimate leaves residuals unchanged.
        for _ in range(20):
            t = random_similarity(rng)
            g = Similarity(1.0, random_rotation(rng), rng.uniform(-1, 1, size=3))
            a = rng.uniform(-1, 1, size=3)
            b = rng.uniform(-1, 1, size=3)
            corr = Correspondence(a, b, 0.05)
            conj = g.compose(t).compose(g.inverse())
            moved = Correspondence(g.apply(a), g.apply(b), 0.05)
            assert residual(moved, conj) == pytest.approx(residual(corr, t), rel=1e-9, abs=1e-9)


class TestConsensusSet:
    def test_noiseless_full(self, rng):
        t = random_similarity(rng)
        corrs = [Correspondence(a, t.apply(a), 0.02) for a in rng.uniform(-1, 1, (10, 3))]
        assert consensus_set(corrs, t, c=1.0) == list(range(10))

    def test_forced_exclusion(self, rng):
        t = random_similarity(rng)
        beta = 0.02
        corrs = [Correspondence(a, t.apply(a), beta) for a in rng.uniform(-1, 1, (6, 3))]
        bad = Correspondence(corrs[2].a, corrs[2].b + np.array([10 * beta, 0, 0]), beta)
        corrs[2] = bad
        assert consensus_set(corrs, t, c=1.0) == [0, 1, 3, 4, 5]

    def test_matches_per_index_filter(self, rng):
        for _ in range(10):
            t = random_similarity(rng)
            corrs = [
                Correspondence(rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3), rng.uniform(0.05, 1.0))
                for _ in range(15)
            ]
            c = rng.uniform(0.5, 2.0)
            expected = [i for i, corr in enumerate(corrs) if residual(corr, t) <= 1.0 / c**2]
            assert consensus_set(corrs, t, c) == expected

    def test_empty_input_raises(self, rng):
        with pytest.raises(InsufficientInputError):
            consensus_set([], random_similarity(rng))

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10**6), c_lo=st.floats(0.1, 2.0), factor=st.floats(1.0, 4.0))
    def test_monotone_in_c(self, seed, c_lo, factor):
        # Larger c means a stricter threshold 1/c^2, hence a smaller set.
        r = make_rng(seed)
        t = random_similarity(r)
        corrs = [
            Correspondence(r.uniform(-1, 1, 3), r.uniform(-1, 1, 3), r.uniform(0.05, 1.0))
            for _ in range(12)
        ]
        c_hi = c_lo * factor
        assert set(consensus_set(corrs, t, c_hi)) <= set(consensus_set(corrs, t, c_lo))


class TestAngleBetween:
    def test_parallel(self):
        assert angle_between(np.array([1.0, 0, 0]), np.array([1.0, 0, 0])) == 0.0

    def test_orthogonal(self):
        assert angle_between(np.array([1.0, 0, 0]), np.array([0, 1.0, 0])) == pytest.approx(
            np.pi / 2, abs=1e-15)

    def test_near_parallel_accuracy(self):
        # 1e-8 rad apart; oracle evaluates the exact angle between the
        # float64 vectors at 50-digit precision.
        u = np.array([1.0, 0.0, 0.0])
        r = rotation_from_axis_angle(np.array([0.0, 0.0, 1.0]), 1e-8)
        v = r @ u
        got = angle_between(u, v)
        with mpmath.workdps(50):
            mu = [mpmath.mpf(x) for x in u]
            mv = [mpmath.mpf(x) for x in v]
            cross = [mu[1] * mv[2] - mu[2] * mv[1],
                     mu[2] * mv[0] - mu[0] * mv[2],
                     mu[0] * mv[1] - mu[1] * mv[0]]
            cn = mpmath.sqrt(sum(x * x for x in cross))
            dot = sum(x * y for x, y in zip(mu, mv))
            expected = float(mpmath.atan2(cn, dot))
        assert got == pytest.approx(expected, rel=1e-3)

    def test_antiparallel(self):
        assert angle_between(np.array([1.0, 0, 0]), np.array([-1.0, 0, 0])) == pytest.approx(
            np.pi, abs=1e-15)

    def test_zero_vector_raises(self):
        with pytest.raises(DegenerateGeometryError):
            angle_between(np.zeros(3), np.array([1.0, 0, 0]))


class TestGeodesicRotationError:
    def test_identity_pair(self, rng):
        r = random_rotation(rng)
        assert geodesic_rotation_error(r, r) == pytest.approx(0.0, abs=1e-7)

    def test_axis_angle_magnitude(self, rng):
        axis = rng.normal(size=3)
        r = rotation_from_axis_angle(axis, 0.3)
        assert geodesic_rotation_error(r, np.eye(3)) == pytest.approx(0.3, abs=1e-12)

    def test_matches_quaternion_oracle(self, rng):
        # Oracle: angle of the relative quaternion, 2 * atan2(||vec||, |w|).
        for _ in range(50):
            r1 = random_rotation(rng)
            r2 = random_rotation(rng)
            q = quaternion_from_rotation(r1.T @ r2)
            expected = 2.0 * np.arctan2(np.linalg.norm(q[1:]), abs(q[0]))
            assert geodesic_rotation_error(r1, r2) == pytest.approx(expected, abs=1e-9)

    def test_relative_angle_property(self, rng):
        for _ in range(25):
            r = random_rotation(rng)
            axis = rng.normal(size=3)
            theta = rng.uniform(0, np.pi)
            a = rotation_from_axis_angle(axis, theta)
            assert geodesic_rotation_error(r, r @ a) == pytest.approx(theta, abs=1e-9)


class TestAddError:
    def test_identical_transforms(self, rng):
        t = random_similarity(rng)
        pts = rng.uniform(-1, 1, (20, 3))
        assert add_error(t, t, pts) == 0.0

    def test_pure_offset(self, rng):
        t = random_similarity(rng)
        shifted = Similarity(t.s, t.r, t.t + np.array([0.1, 0.0, 0.0]))
        pts = rng.uniform(-1, 1, (20, 3))
        assert add_error(shifted, t, pts) == pytest.approx(0.1, abs=1e-12)

    def test_matches_per_point_mean(self, rng):
        t1 = random_similarity(rng)
        t2 = random_similarity(rng)
        pts = rng.uniform(-1, 1, (100, 3))
        per_point = [float(np.linalg.norm(t1.apply(p) - t2.apply(p))) for p in pts]
        assert add_error(t1, t2, pts) == pytest.approx(np.mean(per_point), rel=1e-12)

    def test_empty_points_raise(self, rng):
        t = random_similarity(rng)
        with pytest.raises(InsufficientInputError):
            add_error(t, t, np.zeros((0, 3)))


class TestRotationConstruction:
    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10**6), theta=st.floats(-np.pi, np.pi))
    def test_axis_angle_is_orthonormal(self, seed, theta):
        r = make_rng(seed)
        axis = r.normal(size=3)
        m = rotation_from_axis_angle(axis, theta)
        assert np.linalg.norm(m.T @ m - np.eye(3)) <= 1e-9
        assert abs(np.linalg.det(m) - 1.0) <= 1e-9

    def test_quaternion_round_trip(self, rng):
        for _ in range(30):
            m = random_rotation(rng)
            q = quaternion_from_rotation(m)
            assert np.allclose(rotation_from_quaternion(q), m, atol=1e-12)


class TestValidation:
    def test_similarity_rejects_nonpositive_scale(self):
        with pytest.raises(ValueError):
            Similarity(0.0, np.eye(3), np.zeros(3))
        with pytest.raises(ValueError):
            Similarity(-1.0, np.eye(3), np.zeros(3))

    def test_similarity_rejects_reflection(self):
        with pytest.raises(ValueError):
            Similarity(1.0, np.diag([1.0, 1.0, -1.0]), np.zeros(3))

    def test_correspondence_rejects_bad_beta(self):
        with pytest.raises(ValueError):
            Correspondence(np.zeros(3), np.ones(3), 0.0)

    def test_correspondence_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            Correspondence(np.array([np.nan, 0, 0]), np.ones(3), 0.1)

    def test_inlier_bound_soundness(self, rng):
        # Construction helper must produce residuals within the threshold.
        t = random_similarity(rng)
        corrs = inlier_correspondences(rng, t, 40)
        assert consensus_set(corrs, t, c=1.0) == list(range(40))
