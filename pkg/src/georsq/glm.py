"""Classical GLM fitting (IRLS) and the variance-arc-length R², no random effect.

The coefficient here is

    R2 = 1 - sum_i c_V(y_i, yhat_i) / sum_i c_V(y_i, yhat_0)

with observations on the family mean scale (binomial: proportions y/m) and
yhat_0 the intercept-only prediction. With a gaussian family and identity
link this is exactly 1 - RSS/TSS. The value is returned unclipped and may
be negative for pathological fits.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import lstsq
from scipy.special import xlogy
from sklearn.base import BaseEstimator

from .data import Dataset
from .exceptions import ConvergenceError, UndefinedR2Error
from .families import Family, get_family
from .validation import as_float_2d, check_outcomes, check_trials
from .variation import cv_total

_SEPARATION_ETA = 30.0
_SCORE_TOL = 1e-8
# Keep binomial/poisson means off the boundary inside IRLS.
_MU_EPS = 1e-10


@dataclass(frozen=True)
class GlmFit:
    """Result of an IRLS fit."""

    beta: np.ndarray
    fitted_means: np.ndarray
    dispersion: Optional[float]
    converged: bool
    iterations: int
    deviance: float
    separation: bool
    family_kind: str


def _initial_mu(family: Family, p, m):
    if family.kind == "binomial":
        return (p * m + 0.5) / (m + 1.0)
    if family.kind == "poisson":
        return p + 0.1
    return p.copy()


def _clip_mu(family: Family, mu):
    if family.kind == "binomial":
        return np.clip(mu, _MU_EPS, 1.0 - _MU_EPS)
    if family.kind == "poisson":
        return np.maximum(mu, _MU_EPS)
    return mu


def _deviance(family: Family, p, mu, m):
    if family.kind == "binomial":
        return float(
            2.0 * np.sum(xlogy(m * p, p / mu) + xlogy(m * (1.0 - p), (1.0 - p) / (1.0 - mu)))
        )
    if family.kind == "poisson":
        return float(2.0 * np.sum(xlogy(m * p, p / mu) - m * (p - mu)))
    return float(np.sum(m * (p - mu) ** 2))


def irls(D, y, m, family, max_iter=100, tol=1e-10) -> GlmFit:
    """Iteratively reweighted least squares with canonical links.

    ``D`` must carry a leading intercept column. Offsets ``m`` act as
    binomial denominators (or poisson exposures); observations are fitted
    on the mean scale p = y/m. Non-intercept columns are standardized
    internally for numerical stability and the coefficients mapped back.
    """
    family = get_family(family)
    if family.kind == "quasi":
        raise ValueError(
            "quasi-families are supported by the variation functional and "
            "scoring, not by the fitting path"
        )
    D = np.asarray(D, dtype=float)
    y = np.asarray(y, dtype=float)
    m = np.asarray(m, dtype=float)
    n, q = D.shape
    p = y / m

    # Standardize non-intercept columns; undo on exit.
    shift = np.zeros(q)
    scale = np.ones(q)
    if q > 1:
        shift[1:] = D[:, 1:].mean(axis=0)
        scale[1:] = D[:, 1:].std(axis=0)
        scale[scale == 0.0] = 1.0
    Ds = (D - shift) / scale

    mu = _clip_mu(family, _initial_mu(family, p, m))
    eta = family.linkfun(mu)
    dev = _deviance(family, p, mu, m)
    converged_dev = False
    it = 0
    for it in range(1, max_iter + 1):
        v = family.variance(mu)
        w = m * v  # canonical link: Fisher scoring weight
        z = eta + (p - mu) / v
        sw = np.sqrt(w)
        beta_s, *_ = lstsq(Ds * sw[:, None], z * sw)
        eta = Ds @ beta_s
        mu = _clip_mu(family, family.linkinv(eta))
        dev_old, dev = dev, _deviance(family, p, mu, m)
        if abs(dev - dev_old) / (abs(dev) + 0.1) < tol:
            converged_dev = True
            break
    if not converged_dev:
        raise ConvergenceError(
            f"IRLS did not converge in {max_iter} iterations "
            f"(last deviance change {abs(dev - dev_old):.3e})"
        )

    score = Ds.T @ (y - m * mu)
    converged = bool(np.max(np.abs(score)) < _SCORE_TOL)
    beta = beta_s / scale
    beta[0] -= float(np.sum(beta_s[1:] * shift[1:] / scale[1:])) if q > 1 else 0.0
    separation = bool(family.kind == "binomial" and np.max(np.abs(eta)) > _SEPARATION_ETA)
    dispersion = float(dev / (n - q)) if family.kind == "gaussian" else None
    return GlmFit(
        beta=beta,
        fitted_means=mu,
        dispersion=dispersion,
        converged=converged,
        iterations=it,
        deviance=dev,
        separation=separation,
        family_kind=family.kind,
    )


def fit_glm(data: Dataset, family) -> GlmFit:
    """Fit a classical GLM to a dataset (deterministic)."""
    return irls(data.design, data.y, data.m, family)


def baseline_prediction(data: Dataset, family) -> float:
    """Intercept-only prediction on the mean scale (constant over sites)."""
    fit = irls(np.ones((data.n, 1)), data.y, data.m, family)
    return float(fit.fitted_means[0])


def r2_glm(data: Dataset, family, fit: GlmFit) -> float:
    """Variance-arc-length R² of a GLM fit against the intercept-only baseline."""
    family = get_family(family)
    observed = data.proportions
    yhat0 = baseline_prediction(data, family)
    denom = cv_total(family, observed, yhat0)
    if denom == 0.0:
        raise UndefinedR2Error(
            "all observations identical: baseline variation is zero"
        )
    num = cv_total(family, observed, fit.fitted_means)
    return 1.0 - num / denom


class GLM(BaseEstimator):
    """Generalized linear model with a variance-arc-length R² score.

    Parameters
    ----------
    family : str or Family, default="gaussian"
        One of "gaussian", "binomial", "poisson" (canonical links).
    max_iter : int, default=100
        IRLS iteration budget.
    tol : float, default=1e-10
        Relative deviance-change tolerance.

    The design matrix handed to :meth:`fit` must NOT include an intercept
    column; one is added internally. Binomial outcomes are counts of
    successes with ``trials`` giving the denominators.
    """

    def __init__(self, family="gaussian", max_iter=100, tol=1e-10):
        self.family = family
        self.max_iter = max_iter
        self.tol = tol

    def _design(self, X, n=None):
        if X is None:
            if n is None:
                raise ValueError("X=None requires a known number of rows")
            X = np.empty((n, 0))
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.shape[1]:
            X = as_float_2d(X, name="X")
        return np.column_stack([np.ones(X.shape[0]), X])

    def fit(self, X, y, trials=None):
        """Fit by IRLS. ``trials`` defaults to 1 for every observation."""
        family = get_family(self.family)
        y = np.asarray(y, dtype=float).ravel()
        n = y.size
        D = self._design(X, n=n)
        if D.shape[0] != n:
            raise ValueError(f"X has {D.shape[0]} rows but y has {n}")
        m = check_trials(1 if trials is None else trials, n, family.kind)
        check_outcomes(y, m, family.kind)
        result = irls(D, y, m, family, max_iter=self.max_iter, tol=self.tol)
        self.beta_ = result.beta
        self.intercept_ = float(result.beta[0])
        self.coef_ = result.beta[1:]
        self.fitted_means_ = result.fitted_means
        self.converged_ = result.converged
        self.n_iter_ = result.iterations
        self.deviance_ = result.deviance
        self.dispersion_ = result.dispersion
        self.separation_ = result.separation
        self.n_features_in_ = D.shape[1] - 1
        return self

    def predict(self, X):
        """Predicted means g^-1(X beta) on the family mean scale."""
        D = self._design(X)
        return get_family(self.family).linkinv(D @ self.beta_)

    def score(self, X, y, trials=None):
        """Variance-arc-length R² against an intercept-only baseline on (y, trials)."""
        family = get_family(self.family)
        y = np.asarray(y, dtype=float).ravel()
        m = check_trials(1 if trials is None else trials, y.size, family.kind)
        observed = y / m
        mu = family.linkinv(self._design(X, n=y.size) @ self.beta_)
        baseline = irls(np.ones((y.size, 1)), y, m, family).fitted_means[0]
        denom = cv_total(family, observed, float(baseline))
        if denom == 0.0:
            raise UndefinedR2Error("all observations identical: baseline variation is zero")
        return 1.0 - cv_total(family, observed, mu) / denom
