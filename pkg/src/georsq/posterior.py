"""Sampling from the latent-field predictive distribution S | (y, d).

The path is the classic one for latent gaussian models: Newton-Raphson to
the posterior mode, then a Langevin-type Metropolis-Hastings chain run in
the space standardized by the Cholesky factor of the negative log-posterior
Hessian at the mode. Standardizing is what buys acceptable mixing once n
reaches the order of a hundred sites.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.linalg import cholesky, cho_solve, solve_triangular

from .covariance import CovParams, build_cov
from .data import Dataset
from .exceptions import ConvergenceError, SamplerDiagnosticError
from .families import get_family

TARGET_ACCEPTANCE = 0.574  # optimal Langevin acceptance rate
_ADAPT_DECAY = 0.6


@dataclass(frozen=True)
class GlgmParams:
    """Regression coefficients plus latent-field covariance parameters."""

    beta: np.ndarray
    cov: CovParams

    def __post_init__(self):
        object.__setattr__(self, "beta", np.atleast_1d(np.asarray(self.beta, dtype=float)))


@dataclass(frozen=True)
class LaplaceMode:
    """Posterior mode of S and the Cholesky factor of the Hessian there."""

    s_hat: np.ndarray
    hessian_chol: np.ndarray
    converged: bool
    gradient_norm: float
    iterations: int


@dataclass(frozen=True)
class MalaSchedule:
    """Chain schedule; the seed is mandatory (no silent nondeterminism)."""

    seed: int
    burn_in: int = 10_000
    thin: int = 8
    n_samples: int = 1_000

    def __post_init__(self):
        if self.seed is None:
            raise ValueError("a seed is required for posterior sampling")
        if self.n_samples < 1 or self.thin < 1 or self.burn_in < 0:
            raise ValueError("schedule requires n_samples >= 1, thin >= 1, burn_in >= 0")


@dataclass(frozen=True)
class PosteriorDraws:
    """Retained samples of S | (y, d) with sampler diagnostics."""

    draws: np.ndarray  # B x n
    acceptance_rate: float
    burn_in: int
    thin: int
    seed: int
    step_size: float
    step_size_at_freeze: float
    mode: LaplaceMode

    @property
    def n_samples(self) -> int:
        return self.draws.shape[0]

    def to_csv(self, path) -> None:
        """Export as CSV, one row per retained draw, one column per site."""
        header = ",".join(f"s{i + 1}" for i in range(self.draws.shape[1]))
        np.savetxt(Path(path), self.draws, delimiter=",", header=header, comments="")


class _ConditionalModel:
    """Log-likelihood of y given the latent field, by family.

    Constant terms in the data are dropped; they cancel in every ratio
    this package forms.
    """

    def __init__(self, family, y, m, tau2=None):
        self.family = get_family(family)
        self.kind = self.family.kind
        self.y = np.asarray(y, dtype=float)
        self.m = np.asarray(m, dtype=float)
        if self.kind == "gaussian":
            if tau2 is None or tau2 <= 0:
                raise ValueError("gaussian conditional model requires tau2 > 0")
            self.tau2 = float(tau2)
        elif self.kind not in ("binomial", "poisson"):
            raise ValueError(f"unsupported family for latent-field models: {self.kind}")

    def loglik_terms(self, eta):
        """Per-site log-likelihood contributions (vectorized over draws)."""
        with np.errstate(over="ignore"):
            if self.kind == "binomial":
                return self.y * eta - self.m * np.logaddexp(0.0, eta)
            if self.kind == "poisson":
                return self.y * eta - self.m * np.exp(eta)
            return -0.5 * (self.y - eta) ** 2 / self.tau2

    def loglik(self, eta):
        return np.sum(self.loglik_terms(eta), axis=-1)

    def grad(self, eta):
        """d loglik / d eta."""
        with np.errstate(over="ignore"):
            if self.kind == "binomial":
                return self.y - self.m * self.family.linkinv(eta)
            if self.kind == "poisson":
                return self.y - self.m * np.exp(eta)
            return (self.y - eta) / self.tau2

    def curvature(self, eta):
        """-d2 loglik / d eta2, the W weights."""
        with np.errstate(over="ignore"):
            if self.kind == "binomial":
                mu = self.family.linkinv(eta)
                return self.m * mu * (1.0 - mu)
            if self.kind == "poisson":
                return self.m * np.exp(eta)
            return np.full_like(np.asarray(eta, dtype=float), 1.0 / self.tau2)


def _latent_pieces(data: Dataset, family, params: GlgmParams):
    family = get_family(family)
    tau2 = params.cov.tau2 if family.kind == "gaussian" else None
    if family.kind != "gaussian" and params.cov.tau2 != 0.0:
        raise ValueError("nugget tau2 is supported for gaussian responses only")
    model = _ConditionalModel(family, data.y, data.m, tau2=tau2)
    sigma = build_cov(data.coords, params.cov)
    eta0 = data.design @ params.beta
    return model, sigma, eta0


def laplace_mode(
    data: Dataset,
    family,
    params: GlgmParams,
    tol=1e-8,
    max_iter=100,
) -> LaplaceMode:
    """Newton-Raphson maximization of log p(y|S) + log p(S).

    The negative log-posterior Hessian W(s) + Sigma^-1 is factored at the
    mode and reused by the sampler as its preconditioner.
    """
    model, sigma, eta0 = _latent_pieces(data, family, params)
    n = data.n
    sigma_inv = sigma.inverse()
    s = np.zeros(n)
    objective = lambda s_: model.loglik(eta0 + s_) - 0.5 * s_ @ (sigma_inv @ s_)
    current = objective(s)
    grad_norm = np.inf
    for it in range(1, max_iter + 1):
        eta = eta0 + s
        grad = model.grad(eta) - sigma_inv @ s
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm < tol:
            break
        hess = sigma_inv + np.diag(model.curvature(eta))
        step = cho_solve((cholesky(hess, lower=True), True), grad)
        # Halve until the log-posterior improves (Newton may overshoot);
        # the slack absorbs rounding noise right at the optimum.
        scale = 1.0
        for _ in range(40):
            candidate = s + scale * step
            value = objective(candidate)
            if value >= current - 1e-9 * (abs(current) + 1.0):
                break
            scale *= 0.5
        else:
            raise ConvergenceError(
                f"mode search stalled at iteration {it} "
                f"(gradient max-norm {grad_norm:.3e})"
            )
        s, current = candidate, value
    else:
        raise ConvergenceError(
            f"mode search did not converge in {max_iter} iterations "
            f"(gradient max-norm {grad_norm:.3e})"
        )
    hess = sigma_inv + np.diag(model.curvature(eta0 + s))
    return LaplaceMode(
        s_hat=s,
        hessian_chol=cholesky(hess, lower=True),
        converged=True,
        gradient_norm=grad_norm,
        iterations=it,
    )


def _check_finite_start(model, eta, logpost):
    if np.isfinite(logpost):
        return
    terms = model.loglik_terms(eta)
    bad = np.nonzero(~np.isfinite(np.atleast_1d(terms)))[0]
    raise SamplerDiagnosticError(
        f"non-finite log-posterior at the chain start; offending sites {bad.tolist()}"
    )


def sample_posterior(
    data: Dataset,
    family,
    params: GlgmParams,
    schedule: MalaSchedule,
    mode: Optional[LaplaceMode] = None,
) -> PosteriorDraws:
    """Langevin Metropolis-Hastings chain for S | (y, d), seeded at the mode.

    The chain runs on u = L^T (S - s_hat) with L the Hessian factor, where
    the target is approximately standard normal. The step size is adapted
    during burn-in by Robbins-Monro toward acceptance 0.574 and frozen
    afterwards. Draws are reproducible from (seed, data, params, schedule).
    """
    model, sigma, eta0 = _latent_pieces(data, family, params)
    if mode is None:
        mode = laplace_mode(data, family, params)
    if not mode.converged:
        raise ConvergenceError("posterior mode search did not converge")
    n = data.n
    L = mode.hessian_chol
    # Dense maps: u -> s is L^-T u + s_hat; gradient pullback is L^-1 grad_s.
    l_inv = solve_triangular(L, np.eye(n), lower=True)
    l_inv_t = l_inv.T
    sigma_inv = sigma.inverse()

    def evaluate(u):
        s = mode.s_hat + l_inv_t @ u
        eta = eta0 + s
        prior_grad = sigma_inv @ s
        logpost = model.loglik(eta) - 0.5 * float(s @ prior_grad)
        grad_u = l_inv @ (model.grad(eta) - prior_grad)
        return s, logpost, grad_u

    rng = np.random.default_rng(schedule.seed)
    h = 1.65 / n ** (1.0 / 6.0)
    u = np.zeros(n)
    s, logpost, grad_u = evaluate(u)
    _check_finite_start(model, eta0 + s, logpost)

    total = schedule.burn_in + schedule.thin * schedule.n_samples
    draws = np.empty((schedule.n_samples, n))
    kept = 0
    accepted_post = 0
    proposals_post = 0
    h_frozen = None
    for t in range(1, total + 1):
        half = 0.5 * h * h
        mean_fwd = u + half * grad_u
        u_prop = mean_fwd + h * rng.standard_normal(n)
        s_prop, logpost_prop, grad_prop = evaluate(u_prop)
        if np.isfinite(logpost_prop):
            mean_rev = u_prop + half * grad_prop
            log_q_fwd = -0.5 * float(np.sum((u_prop - mean_fwd) ** 2)) / (h * h)
            log_q_rev = -0.5 * float(np.sum((u - mean_rev) ** 2)) / (h * h)
            log_alpha = (logpost_prop - logpost) + (log_q_rev - log_q_fwd)
        else:
            log_alpha = -np.inf
        alpha = float(np.exp(min(log_alpha, 0.0)))
        accept = rng.uniform() < alpha
        if accept:
            u, s, logpost, grad_u = u_prop, s_prop, logpost_prop, grad_prop
        if t <= schedule.burn_in:
            h *= np.exp(t ** (-_ADAPT_DECAY) * (alpha - TARGET_ACCEPTANCE))
        else:
            if h_frozen is None:
                h_frozen = h
            proposals_post += 1
            accepted_post += int(accept)
            if (t - schedule.burn_in) % schedule.thin == 0:
                draws[kept] = s
                kept += 1
    acceptance = accepted_post / max(proposals_post, 1)
    result = PosteriorDraws(
        draws=draws,
        acceptance_rate=float(acceptance),
        burn_in=schedule.burn_in,
        thin=schedule.thin,
        seed=schedule.seed,
        step_size=float(h),
        step_size_at_freeze=float(h_frozen if h_frozen is not None else h),
        mode=mode,
    )
    if not 0.1 <= acceptance <= 0.9:
        raise SamplerDiagnosticError(
            f"post-adaptation acceptance rate {acceptance:.3f} outside [0.1, 0.9]; "
            "check the schedule or parameter values"
        )
    return result
