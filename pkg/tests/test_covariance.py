"""Exponential covariance construction, factorization policy, GP sampling."""

import numpy as np
import pytest

import georsq.covariance as covariance
from georsq.covariance import CovMatrix, CovParams, build_cov, gp_sample
from georsq.exceptions import IllConditionedError


def grid_coords(n, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    return rng.uniform(0, scale, (n, 2))


class TestParams:
    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            CovParams(sigma2=0.0, phi=1.0)
        with pytest.raises(ValueError):
            CovParams(sigma2=1.0, phi=-2.0)
        with pytest.raises(ValueError):
            CovParams(sigma2=1.0, phi=1.0, tau2=-0.1)


class TestBuildCov:
    def test_definition_at_range_distance(self):
        coords = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 25.0]])
        cov = build_cov(coords, CovParams(sigma2=2.0, phi=10.0))
        np.testing.assert_allclose(cov.sigma[0, 1], 2.0 * np.exp(-1.0), rtol=1e-15)
        np.testing.assert_allclose(np.diag(cov.sigma), 2.0)

    def test_matches_brute_force_double_loop(self):
        coords = grid_coords(20, seed=5)
        params = CovParams(sigma2=1.7, phi=0.3)
        cov = build_cov(coords, params)
        n = len(coords)
        expected = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                d = np.sqrt(np.sum((coords[i] - coords[j]) ** 2))
                expected[i, j] = params.sigma2 * np.exp(-d / params.phi)
        np.testing.assert_allclose(cov.sigma, expected, atol=1e-14)

    def test_rigid_motion_invariance(self):
        coords = grid_coords(15, seed=9)
        params = CovParams(sigma2=1.0, phi=0.5)
        theta = 0.7
        rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        moved = coords @ rot.T + np.array([3.0, -8.0])
        np.testing.assert_allclose(
            build_cov(coords, params).sigma, build_cov(moved, params).sigma, atol=1e-12
        )

    def test_longer_range_raises_every_off_diagonal(self):
        coords = grid_coords(12, seed=2)
        s1 = build_cov(coords, CovParams(sigma2=1.0, phi=0.2)).sigma
        s2 = build_cov(coords, CovParams(sigma2=1.0, phi=0.9)).sigma
        off = ~np.eye(len(coords), dtype=bool)
        assert np.all(s2[off] > s1[off])

    def test_log_det_matches_factor(self):
        coords = grid_coords(25, seed=4)
        cov = build_cov(coords, CovParams(sigma2=2.5, phi=0.4))
        np.testing.assert_allclose(
            cov.log_det, 2.0 * np.sum(np.log(np.diag(cov.chol))), rtol=1e-14
        )
        sign, ref = np.linalg.slogdet(cov.sigma)
        assert sign == 1.0
        np.testing.assert_allclose(cov.log_det, ref, rtol=1e-10)

    def test_solve_and_inverse(self):
        coords = grid_coords(10, seed=8)
        cov = build_cov(coords, CovParams(sigma2=1.0, phi=0.3))
        b = np.arange(10.0)
        np.testing.assert_allclose(cov.sigma @ cov.solve(b), b, atol=1e-9)
        np.testing.assert_allclose(cov.inverse() @ cov.sigma, np.eye(10), atol=1e-8)

    def test_jitter_escalation_on_singular_matrix(self):
        # Coincident sites make Sigma exactly singular; the retry policy
        # must rescue the factorization with the smallest jitter step.
        coords = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])
        cov = build_cov(coords, CovParams(sigma2=1.0, phi=1.0))
        assert cov.jitter == pytest.approx(1e-10)
        np.testing.assert_allclose(np.diag(cov.sigma), 1.0 + cov.jitter)

    def test_failure_names_minimum_distance(self, monkeypatch):
        def always_fail(*args, **kwargs):
            raise np.linalg.LinAlgError("forced")

        monkeypatch.setattr(covariance, "cholesky", always_fail)
        coords = np.array([[0.0, 0.0], [0.25, 0.0], [1.0, 1.0]])
        with pytest.raises(IllConditionedError, match="minimum pairwise distance is 0.25"):
            build_cov(coords, CovParams(sigma2=1.0, phi=1.0))


class TestGpSample:
    def test_deterministic_per_seed(self):
        cov = build_cov(grid_coords(8, seed=1), CovParams(sigma2=1.0, phi=0.4))
        np.testing.assert_array_equal(gp_sample(cov, 42), gp_sample(cov, 42))
        assert not np.array_equal(gp_sample(cov, 42), gp_sample(cov, 43))

    def test_degenerate_variance(self):
        cov = build_cov(grid_coords(6, seed=3), CovParams(sigma2=1e-20, phi=0.4))
        assert np.max(np.abs(gp_sample(cov, 0))) < 1e-8

    def test_empirical_variance_single_site(self):
        cov = build_cov(np.array([[0.0, 0.0], [5.0, 5.0]]), CovParams(sigma2=1.6, phi=1.0))
        rng = np.random.default_rng(2024)
        draws = np.array([gp_sample(cov, rng)[0] for _ in range(100_000)])
        assert abs(draws.var() / 1.6 - 1.0) < 0.02
