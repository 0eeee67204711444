"""Isotropic exponential covariance for the latent spatial field.

Distances are planar Euclidean; geographic coordinates must be projected
before use. Factorizations follow a jitter escalation policy so that
near-duplicate sites fail loudly instead of silently.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import cdist, pdist

from .exceptions import IllConditionedError

# Diagonal jitter is escalated from 1e-10 * sigma2 by factors of 10 up to
# 1e-6 * sigma2 before giving up.
_JITTER_START = 1e-10
_JITTER_MAX = 1e-6


@dataclass(frozen=True)
class CovParams:
    """Covariance parameters: process variance, range and optional nugget."""

    sigma2: float
    phi: float
    tau2: float = 0.0

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if not self.phi > 0:
            raise ValueError(f"phi must be positive, got {self.phi}")
        if self.tau2 < 0:
            raise ValueError(f"tau2 must be nonnegative, got {self.tau2}")


@dataclass(frozen=True)
class CovMatrix:
    """Exponential covariance matrix with its lower Cholesky factor."""

    sigma: np.ndarray
    chol: np.ndarray
    log_det: float
    jitter: float = 0.0

    @property
    def n(self) -> int:
        return self.sigma.shape[0]

    def solve(self, b) -> np.ndarray:
        """Solve Sigma x = b through the Cholesky factor."""
        return cho_solve((self.chol, True), np.asarray(b, dtype=float))

    def inverse(self) -> np.ndarray:
        return self.solve(np.eye(self.n))

    def half_solve(self, b) -> np.ndarray:
        """Solve L x = b with L the lower factor (whitening transform)."""
        return solve_triangular(self.chol, np.asarray(b, dtype=float), lower=True)


def exponential_correlation(dist, phi):
    """exp(-u / phi) elementwise."""
    return np.exp(-np.asarray(dist, dtype=float) / float(phi))


def distance_matrix(coords) -> np.ndarray:
    coords = np.asarray(coords, dtype=float)
    return cdist(coords, coords)


def _chol_with_jitter(matrix, scale):
    """Lower Cholesky factor with escalating diagonal jitter."""
    jitter = 0.0
    while True:
        try:
            shifted = matrix if jitter == 0.0 else matrix + jitter * np.eye(matrix.shape[0])
            return cholesky(shifted, lower=True), shifted, jitter
        except np.linalg.LinAlgError:
            pass
        if jitter == 0.0:
            jitter = _JITTER_START * scale
        elif jitter < _JITTER_MAX * scale:
            jitter = min(jitter * 10.0, _JITTER_MAX * scale)
        else:
            return None, None, jitter


def build_cov(coords, params: CovParams) -> CovMatrix:
    """Covariance matrix Sigma_ij = sigma2 * exp(-||x_i - x_j|| / phi).

    The nugget is NOT folded in here; it enters model-specific smoothers.
    Raises IllConditionedError when factorization fails at maximum jitter,
    reporting the minimum pairwise distance.
    """
    coords = np.asarray(coords, dtype=float)
    sigma = params.sigma2 * exponential_correlation(distance_matrix(coords), params.phi)
    chol, shifted, jitter = _chol_with_jitter(sigma, params.sigma2)
    if chol is None:
        min_dist = float(np.min(pdist(coords))) if coords.shape[0] > 1 else np.inf
        raise IllConditionedError(
            f"covariance factorization failed at maximum jitter {jitter:.3e}; "
            f"minimum pairwise distance is {min_dist:.6g}"
        )
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return CovMatrix(sigma=shifted, chol=chol, log_det=log_det, jitter=jitter)


def gp_sample(cov: CovMatrix, seed) -> np.ndarray:
    """One zero-mean draw of the latent field, reproducible per seed.

    ``seed`` may be an int or a numpy Generator.
    """
    rng = np.random.default_rng(seed)
    return cov.chol @ rng.standard_normal(cov.n)
