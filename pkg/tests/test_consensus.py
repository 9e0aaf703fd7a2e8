import numpy as np
import pytest

from gmcr.consensus import (
    RotMeasurement,
    TransMeasurement,
    consistency_matrix,
    rotation_consensus,
    rotation_consensus_matrix,
    rotation_gamma,
    rotation_measurements,
    scale_consensus,
    scale_consensus_matrix,
    translation_consensus,
    translation_consensus_matrix,
    translation_measurements,
)
from gmcr.core import Correspondence
from gmcr.errors import DegenerateGeometryError
from gmcr.invariants import ScaleMeasurement, Tim, TimSet, build_tims
from gmcr.synthbench import sample_uniform_rotation

from conftest import inlier_correspondences, make_rng, random_rotation, random_similarity


def _rotation_batch(rng, count):
    q = rng.normal(size=(count, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    m = np.empty((count, 3, 3))
    m[:, 0, 0] = 1 - 2 * (y * y + z * z)
    m[:, 0, 1] = 2 * (x * y - w * z)
    m[:, 0, 2] = 2 * (x * z + w * y)
    m[:, 1, 0] = 2 * (x * y + w * z)
    m[:, 1, 1] = 1 - 2 * (x * x + z * z)
    m[:, 1, 2] = 2 * (y * z - w * x)
    m[:, 2, 0] = 2 * (x * z - w * y)
    m[:, 2, 1] = 2 * (y * z + w * x)
    m[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def _random_scale_pair(rng, c):
    k = ScaleMeasurement(0, float(rng.uniform(0.5, 5.0)), float(rng.uniform(0.01, 0.5)))
    # Bias separations toward the decision boundary.
    gap = rng.uniform(0.0, 2.0) * (k.alpha + rng.uniform(0.01, 0.5)) / c
    j = ScaleMeasurement(1, k.s + rng.choice([-1, 1]) * gap, float(rng.uniform(0.01, 0.5)))
    return k, j


class TestScaleConsensus:
    def test_identical_measurements(self):
        k = ScaleMeasurement(0, 1.7, 0.05)
        assert scale_consensus(k, k, 1.0)

    def test_gap_exceeds_bounds(self):
        k = ScaleMeasurement(0, 1.0, 0.1)
        j = ScaleMeasurement(1, 1.25, 0.1)
        assert not scale_consensus(k, j, 1.0)  # gap 0.25 > 0.2

    def test_touching_intervals(self):
        k = ScaleMeasurement(0, 1.0, 0.1)
        j = ScaleMeasurement(1, 1.2, 0.1)
        assert scale_consensus(k, j, 1.0)

    def test_against_grid_oracle(self):
        # Oracle: a shared scale exists on a dense grid with both residuals
        # within threshold. Grid step alpha_min / 100.
        rng = make_rng(7)
        checked = near_boundary = 0
        for _ in range(300):
            c = float(rng.choice([1.0, 1.0, 0.7, 1.5]))
            k, j = _random_scale_pair(rng, c)
            step = min(k.alpha, j.alpha) / 100.0 / c
            lo = min(k.s - k.alpha / c, j.s - j.alpha / c)
            hi = max(k.s + k.alpha / c, j.s + j.alpha / c)
            grid = np.arange(lo, hi + step, step)
            oracle = bool(np.any(
                (np.abs(grid - k.s) <= k.alpha / c) & (np.abs(grid - j.s) <= j.alpha / c)))
            got = scale_consensus(k, j, c)
            if oracle:
                assert got, "consensus function contradicted a grid witness"
            margin = abs(abs(k.s - j.s) - (k.alpha + j.alpha) / c)
            if margin > 2 * step:
                checked += 1
                assert got == oracle
            else:
                near_boundary += 1
        assert checked > 200  # the carve-out only covers knife-edge pairs
        assert near_boundary < 60

    def test_symmetry_is_exact(self):
        rng = make_rng(8)
        for _ in range(200):
            k, j = _random_scale_pair(rng, 1.0)
            assert scale_consensus(k, j, 1.0) == scale_consensus(j, k, 1.0)

    def test_matrix_matches_scalar(self):
        rng = make_rng(9)
        s = rng.uniform(0.5, 5.0, 40)
        alpha = rng.uniform(0.01, 0.5, 40)
        adj = scale_consensus_matrix(s, alpha, c=1.3)
        for i in range(40):
            assert not adj[i, i]
            for j in range(40):
                if i != j:
                    expected = scale_consensus(
                        ScaleMeasurement(i, float(s[i]), float(alpha[i])),
                        ScaleMeasurement(j, float(s[j]), float(alpha[j])), 1.3)
                    assert bool(adj[i, j]) == expected


class TestRotationGamma:
    def test_zero_slack_needs_exact_alignment(self):
        tim = Tim(0, 1, np.array([1.0, 0, 0]), np.array([0.0, 1.0, 0]), 0.0)
        assert rotation_gamma(tim, s_hat=1.0, c=1.0) == 0.0

    def test_full_slack_admits_everything(self):
        tim = Tim(0, 1, np.array([1.0, 0, 0]), np.array([0.0, 1.0, 0]), 2.0)
        assert rotation_gamma(tim, s_hat=1.0, c=1.0) == pytest.approx(np.pi)

    def test_infeasible_returns_none(self):
        tim = Tim(0, 1, np.array([1.0, 0, 0]), np.array([3.0, 0, 0]), 0.5)
        assert rotation_gamma(tim, s_hat=1.0, c=1.0) is None

    def test_zero_norm_raises(self):
        tim = Tim(0, 1, np.zeros(3), np.array([1.0, 0, 0]), 0.1)
        with pytest.raises(DegenerateGeometryError):
            rotation_gamma(tim, 1.0, 1.0)

    def test_chord_and_cone_admit_same_rotations(self):
        # Sampled-rotation equivalence: for every sampled R the chord test
        # and the angle test agree.
        rng = make_rng(11)
        rotations = _rotation_batch(rng, 10**4)
        for _ in range(20):
            s_hat = rng.uniform(0.5, 3.0)
            a = rng.normal(size=3)
            a *= rng.uniform(0.3, 1.5) / np.linalg.norm(a)
            true_r = random_rotation(rng)
            noise = rng.normal(size=3)
            noise *= rng.uniform(0, 0.3) / np.linalg.norm(noise)
            b = s_hat * true_r @ a + noise
            delta = rng.uniform(0.05, 0.6)
            tim = Tim(0, 1, a, b, delta)
            gamma = rotation_gamma(tim, s_hat, 1.0)
            ra = rotations @ a
            chord_ok = np.linalg.norm(b - s_hat * ra, axis=1) <= delta
            if gamma is None:
                assert not chord_ok.any()
                continue
            cos_angle = (ra @ b) / (np.linalg.norm(ra, axis=1) * np.linalg.norm(b))
            angle = np.arccos(np.clip(cos_angle, -1, 1))
            assert np.array_equal(chord_ok, angle <= gamma + 1e-12)

    def test_matches_batch_builder(self, rng):
        truth = random_similarity(rng)
        corrs = inlier_correspondences(rng, truth, 10)
        tims = build_tims(corrs)
        meas = rotation_measurements(tims, truth.s, 1.0)
        assert len(meas) == len(tims)  # all inlier TIMs are feasible at the true scale
        for row in range(len(meas)):
            m = meas[row]
            tim = tims[int(meas.tim_index[row])]
            # arccos near +/-1 amplifies last-bit differences between the
            # scalar and batched norm computations; 1e-9 rad is far below
            # any decision the cone half-angle feeds into.
            assert m.gamma == pytest.approx(rotation_gamma(tim, truth.s, 1.0), abs=1e-9)
            assert np.linalg.norm(m.a_dir) == pytest.approx(1.0, abs=1e-9)
            assert np.linalg.norm(m.b_dir) == pytest.approx(1.0, abs=1e-9)
            assert 0.0 <= m.gamma <= np.pi


def _measurement_pair(rng, consistent: bool):
    """A pair of feasible rotation measurements, optionally from one model."""
    s_hat = float(rng.uniform(0.5, 3.0))
    a = rng.normal(size=(2, 3))
    a *= (rng.uniform(0.3, 1.5, size=2) / np.linalg.norm(a, axis=1))[:, None]
    deltas = rng.uniform(0.05, 0.5, size=2)
    if consistent:
        r = random_rotation(rng)
        noise = rng.normal(size=(2, 3))
        noise *= (rng.uniform(0, 0.9, size=2) * deltas / np.linalg.norm(noise, axis=1))[:, None]
        b = s_hat * a @ r.T + noise
    else:
        b = rng.normal(size=(2, 3))
        b *= (rng.uniform(0.3, 3.0, size=2) / np.linalg.norm(b, axis=1))[:, None]
    tims = TimSet(
        i=np.array([0, 0]), j=np.array([1, 2]),
        a_bar=a, b_bar=b, delta=deltas)
    meas = rotation_measurements(tims, s_hat, 1.0)
    if len(meas) != 2:
        return None
    return s_hat, tims, meas


class TestRotationConsensus:
    def test_self_consensus(self, rng):
        pair = None
        while pair is None:
            pair = _measurement_pair(rng, consistent=True)
        _, _, meas = pair
        assert rotation_consensus(meas[0], meas[0], "tight")
        assert rotation_consensus(meas[0], meas[0], "paper_band")

    def test_ninety_degree_mismatch(self):
        i = RotMeasurement(0, np.array([1.0, 0, 0]), np.array([1.0, 0, 0]), 0.05)
        k = RotMeasurement(1, np.array([0.0, 1.0, 0]), np.array([1.0, 0, 0]), 0.05)
        assert not rotation_consensus(i, k, "tight")
        assert not rotation_consensus(i, k, "paper_band")

    def test_band_bound_formula(self):
        # |phi_a - phi_b| = 0.25; tight bound 0.2 rejects, the asymmetric
        # band min(0.05 + 0.45, 0.15 + 0.15) = 0.3 accepts.
        phi = 0.25
        i = RotMeasurement(0, np.array([1.0, 0, 0]), np.array([1.0, 0, 0]), 0.05)
        k = RotMeasurement(
            1, np.array([np.cos(phi), np.sin(phi), 0]), np.array([1.0, 0, 0]), 0.15)
        assert not rotation_consensus(i, k, "tight")
        assert rotation_consensus(i, k, "paper_band")

    def test_band_admits_superset_of_tight(self, rng):
        for _ in range(100):
            pair = _measurement_pair(rng, consistent=bool(rng.integers(2)))
            if pair is None:
                continue
            _, _, meas = pair
            if rotation_consensus(meas[0], meas[1], "tight"):
                assert rotation_consensus(meas[0], meas[1], "paper_band")

    def test_no_false_negatives_vs_sampled_rotations(self):
        # If any sampled rotation satisfies both chord bounds, the pairwise
        # test must accept, in both modes.
        rng = make_rng(13)
        rotations = _rotation_batch(rng, 20000)
        witnessed = 0
        for trial in range(300):
            pair = _measurement_pair(rng, consistent=trial % 2 == 0)
            if pair is None:
                continue
            s_hat, tims, meas = pair
            ra0 = rotations @ tims.a_bar[0]
            ra1 = rotations @ tims.a_bar[1]
            ok = (
                (np.linalg.norm(tims.b_bar[0] - s_hat * ra0, axis=1) <= tims.delta[0])
                & (np.linalg.norm(tims.b_bar[1] - s_hat * ra1, axis=1) <= tims.delta[1])
            )
            if ok.any():
                witnessed += 1
                assert rotation_consensus(meas[0], meas[1], "tight")
                assert rotation_consensus(meas[0], meas[1], "paper_band")
        assert witnessed > 80  # the oracle must actually bite

    def test_symmetry_is_exact(self, rng):
        for _ in range(200):
            pair = _measurement_pair(rng, consistent=bool(rng.integers(2)))
            if pair is None:
                continue
            _, _, meas = pair
            for mode in ("tight", "paper_band"):
                assert rotation_consensus(meas[0], meas[1], mode) == rotation_consensus(
                    meas[1], meas[0], mode)

    def test_matrix_matches_scalar(self, rng):
        truth = random_similarity(rng)
        corrs = inlier_correspondences(rng, truth, 9)
        meas = rotation_measurements(build_tims(corrs), truth.s, 1.0)
        n = len(meas)
        for mode in ("tight", "paper_band"):
            adj = rotation_consensus_matrix(meas, mode, block=7)
            for i in range(n):
                assert not adj[i, i]
                for j in range(n):
                    if i != j:
                        assert bool(adj[i, j]) == rotation_consensus(meas[i], meas[j], mode)


class TestTranslationMeasurements:
    def test_noiseless_votes_equal_truth(self, rng):
        truth = random_similarity(rng)
        pts = rng.uniform(-1, 1, (8, 3))
        corrs = [Correspondence(p, truth.apply(p), 0.02) for p in pts]
        meas = translation_measurements(corrs, truth.s, truth.r)
        assert np.abs(meas.t - truth.t).max() < 1e-12

    def test_plain_arithmetic(self):
        corrs = [Correspondence(np.zeros(3), np.array([1.0, 2.0, 3.0]), 0.1)]
        meas = translation_measurements(corrs, 1.0, np.eye(3))
        assert np.array_equal(meas[0].t, [1.0, 2.0, 3.0])

    def test_inlier_votes_within_beta(self, rng):
        truth = random_similarity(rng)
        corrs = inlier_correspondences(rng, truth, 25, beta=0.04)
        meas = translation_measurements(corrs, truth.s, truth.r)
        assert np.all(np.linalg.norm(meas.t - truth.t, axis=1) <= 0.04 + 1e-12)

    def test_index_subset(self, rng):
        truth = random_similarity(rng)
        corrs = inlier_correspondences(rng, truth, 6)
        meas = translation_measurements(corrs, truth.s, truth.r, indices=np.array([4, 1]))
        assert list(meas.corr_index) == [4, 1]
        assert len(meas) == 2


class TestTranslationConsensus:
    def test_coincident_centers(self):
        i = TransMeasurement(0, np.array([1.0, 2, 3]), 0.01)
        assert translation_consensus(i, i, 1.0)

    def test_sphere_arithmetic(self):
        i = TransMeasurement(0, np.zeros(3), 0.02)
        j = TransMeasurement(1, np.array([0.05, 0.0, 0.0]), 0.02)
        assert not translation_consensus(i, j, 1.0)  # 0.05 > 0.04

    def test_against_grid_oracle(self):
        # Oracle: a shared translation exists on a dense grid over the first
        # sphere's bounding cube (side 2 beta / c, step beta / 20 / c).
        rng = make_rng(17)
        ax = np.arange(-20, 21) / 20.0  # unit offsets; scaled per pair below
        gx, gy, gz = np.meshgrid(ax, ax, ax, indexing="ij")
        unit_offsets = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
        witnessed = 0
        for _ in range(200):
            c = float(rng.choice([1.0, 1.0, 1.4]))
            bi, bj = rng.uniform(0.05, 0.3, size=2)
            ti = rng.uniform(-1, 1, size=3)
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            dist = rng.uniform(0.0, 1.5) * (bi + bj) / c
            tj = ti + dist * d
            i = TransMeasurement(0, ti, float(bi))
            j = TransMeasurement(1, tj, float(bj))
            got = translation_consensus(i, j, c)

            step = bi / 20.0 / c
            grid = ti + unit_offsets * (bi / c)
            in_i = np.linalg.norm(grid - ti, axis=1) <= bi / c
            in_j = np.linalg.norm(grid - tj, axis=1) <= bj / c
            oracle = bool(np.any(in_i & in_j))
            if oracle:
                witnessed += 1
                assert got, "translation consensus contradicted a grid witness"
            # Away from tangency the intersection lens holds a ball wider
            # than the grid diagonal, so the oracle must agree exactly.
            margin = abs(dist - (bi + bj) / c)
            if margin > 4.0 * step:
                assert got == oracle
        assert witnessed > 60

    def test_symmetry_is_exact(self, rng):
        for _ in range(200):
            i = TransMeasurement(0, rng.uniform(-1, 1, 3), float(rng.uniform(0.01, 0.3)))
            j = TransMeasurement(1, rng.uniform(-1, 1, 3), float(rng.uniform(0.01, 0.3)))
            assert translation_consensus(i, j, 1.0) == translation_consensus(j, i, 1.0)

    def test_matrix_matches_scalar(self, rng):
        truth = random_similarity(rng)
        corrs = inlier_correspondences(rng, truth, 30)
        meas = translation_measurements(corrs, truth.s, truth.r)
        adj = translation_consensus_matrix(meas, c=0.8)
        for i in range(30):
            assert not adj[i, i]
            for j in range(30):
                if i != j:
                    assert bool(adj[i, j]) == translation_consensus(meas[i], meas[j], 0.8)


def test_consistency_matrix_matches_definition(rng):
    truth = random_similarity(rng)
    corrs = inlier_correspondences(rng, truth, 12)
    adj = consistency_matrix(corrs, truth.s, 1.0)
    for i in range(12):
        for j in range(12):
            if i == j:
                assert not adj[i, j]
                continue
            da = np.linalg.norm(corrs[j].a - corrs[i].a)
            db = np.linalg.norm(corrs[j].b - corrs[i].b)
            expected = abs(db - truth.s * da) <= (corrs[i].beta + corrs[j].beta)
            assert bool(adj[i, j]) == expected
