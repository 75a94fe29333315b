import numpy as np
import pytest
import scipy.linalg
import scipy.stats

from autoeval.errors import DegenerateInputError, InsufficientDataError, ShapeError
from autoeval.stats import (
    DatasetStats,
    compute_stats,
    frechet_distance,
    mae,
    rankdata,
    rmse,
    spearman_rho,
    sqrtm_psd,
)


def _stats(mean, cov, count=10):
    return DatasetStats(np.atleast_1d(np.asarray(mean, float)), np.atleast_2d(np.asarray(cov, float)), count)


def two_pass_oracle(x):
    x = [list(map(float, row)) for row in x]
    m, d = len(x), len(x[0])
    mean = [sum(row[j] for row in x) / m for j in range(d)]
    cov = [[sum((row[i] - mean[i]) * (row[j] - mean[j]) for row in x) / (m - 1) for j in range(d)] for i in range(d)]
    return np.array(mean), np.array(cov)


class TestComputeStats:
    def test_two_points(self):
        s = compute_stats([[0, 0], [2, 2]])
        assert np.array_equal(s.mean, [1, 1])
        assert np.array_equal(s.cov, [[2, 2], [2, 2]])
        assert s.count == 2

    def test_constant_rows(self):
        s = compute_stats(np.tile([3.0, -1.0], (10, 1)))
        assert np.array_equal(s.mean, [3, -1])
        assert np.array_equal(s.cov, np.zeros((2, 2)))

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_two_pass_oracle(self, seed):
        x = np.random.default_rng(seed).normal(size=(50, 8)) * 3 + 7
        mean, cov = two_pass_oracle(x)
        s = compute_stats(x)
        np.testing.assert_allclose(s.mean, mean, atol=1e-10)
        np.testing.assert_allclose(s.cov, cov, atol=1e-10)

    def test_exactly_symmetric(self, rng):
        s = compute_stats(rng.normal(size=(30, 12)))
        assert np.array_equal(s.cov, s.cov.T)

    def test_needs_two_rows(self):
        with pytest.raises(InsufficientDataError):
            compute_stats([[1.0, 2.0]])

    def test_ragged_rows(self):
        with pytest.raises(ShapeError):
            compute_stats([[1.0, 2.0], [1.0]])

    def test_stats_validation(self):
        with pytest.raises(ShapeError):
            DatasetStats(np.zeros(2), np.zeros((3, 3)), 5)
        with pytest.raises(ShapeError):
            DatasetStats(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]), 5)
        with pytest.raises(InsufficientDataError):
            DatasetStats(np.zeros(2), np.eye(2), 1)

    def test_arrays_read_only(self):
        s = compute_stats([[0.0, 1.0], [1.0, 0.0]])
        with pytest.raises(ValueError):
            s.mean[0] = 5.0


class TestSqrtm:
    def test_identity(self):
        assert np.allclose(sqrtm_psd(np.eye(4)), np.eye(4))

    def test_diagonal(self):
        np.testing.assert_allclose(sqrtm_psd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)

    def test_random_spd_round_trip(self, rng):
        b = rng.normal(size=(32, 32))
        a = b.T @ b + 0.1 * np.eye(32)
        s = sqrtm_psd(a)
        assert np.linalg.norm(s @ s - a) / np.linalg.norm(a) <= 1e-8
        np.testing.assert_allclose(s, scipy.linalg.sqrtm(a).real, atol=1e-8)

    def test_clamps_negative_eigenvalues(self):
        a = np.diag([1.0, -1e-12])
        s = sqrtm_psd(a)
        assert np.all(np.linalg.eigvalsh(s) >= 0)
        np.testing.assert_allclose(s, np.diag([1.0, 0.0]), atol=1e-6)

    def test_rejects_asymmetric(self):
        with pytest.raises(ShapeError):
            sqrtm_psd(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_rejects_non_square(self):
        with pytest.raises(ShapeError):
            sqrtm_psd(np.ones((2, 3)))


def scipy_fd(a: DatasetStats, b: DatasetStats) -> float:
    diff = a.mean - b.mean
    covmean = scipy.linalg.sqrtm(a.cov @ b.cov).real
    return float(diff @ diff + np.trace(a.cov + b.cov - 2 * covmean))


class TestFrechet:
    def test_identical(self, rng):
        s = compute_stats(rng.normal(size=(40, 6)))
        assert abs(frechet_distance(s, s)) <= 1e-9

    def test_1d_mean_shift(self):
        assert frechet_distance(_stats(0, 1), _stats(1, 1)) == pytest.approx(1.0, abs=1e-9)

    def test_1d_scale(self):
        assert frechet_distance(_stats(0, 4), _stats(0, 1)) == pytest.approx(1.0, abs=1e-9)

    def test_2d_diag(self):
        a = _stats([0, 0], np.eye(2))
        b = _stats([1, 1], 4 * np.eye(2))
        assert frechet_distance(a, b) == pytest.approx(4.0, abs=1e-9)

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_scipy_oracle(self, seed):
        r = np.random.default_rng(seed)
        a = compute_stats(r.normal(size=(60, 10)))
        b = compute_stats(r.normal(loc=0.5, scale=1.5, size=(60, 10)))
        assert frechet_distance(a, b) == pytest.approx(scipy_fd(a, b), rel=1e-7)

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            frechet_distance(_stats([0, 0], np.eye(2)), _stats([0], [[1.0]]))

    def test_non_negative_on_rank_deficient(self, rng):
        x = rng.normal(size=(5, 16))
        s = compute_stats(x)
        assert frechet_distance(s, s) >= 0.0


class TestSpearman:
    def test_inversion(self):
        assert spearman_rho([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=1e-12)

    def test_monotone(self):
        assert spearman_rho([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0, abs=1e-12)

    def test_hand_value(self):
        assert spearman_rho([1, 2, 3, 4], [2, 1, 4, 3]) == pytest.approx(0.6, abs=1e-12)

    def test_average_ranks(self):
        assert np.array_equal(rankdata([10, 20, 20, 5]), [2.0, 3.5, 3.5, 1.0])

    @pytest.mark.parametrize("seed", range(5))
    def test_ties_match_scipy(self, seed):
        r = np.random.default_rng(seed)
        xs = r.integers(0, 5, size=30)
        ys = r.integers(0, 5, size=30)
        assert spearman_rho(xs, ys) == pytest.approx(scipy.stats.spearmanr(xs, ys).statistic, abs=1e-12)

    def test_too_short(self):
        with pytest.raises(InsufficientDataError):
            spearman_rho([1, 2], [1, 2])

    def test_length_mismatch(self):
        with pytest.raises(InsufficientDataError):
            spearman_rho([1, 2, 3], [1, 2])

    def test_constant_input(self):
        with pytest.raises(DegenerateInputError):
            spearman_rho([1, 1, 1, 1], [1, 2, 3, 4])


class TestErrorMetrics:
    def test_zero(self):
        assert rmse([0.3, 0.7], [0.3, 0.7]) == 0.0
        assert mae([0.3, 0.7], [0.3, 0.7]) == 0.0

    def test_single(self):
        assert rmse([0.8], [0.6]) == pytest.approx(0.2)
        assert mae([0.8], [0.6]) == pytest.approx(0.2)

    def test_percent_units_example(self):
        # two neural-regression rows of a published digits comparison
        value = rmse([27.52, 64.11], [25.46, 64.08])
        assert value == pytest.approx(1.4568, abs=1e-4)
        assert round(value, 2) == 1.46

    def test_empty(self):
        with pytest.raises(InsufficientDataError):
            rmse([], [])

    def test_mismatch(self):
        with pytest.raises(InsufficientDataError):
            mae([1.0], [1.0, 2.0])
