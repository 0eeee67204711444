"""Monte Carlo maximum likelihood for the binomial-logit spatial model.

The intractable likelihood ratio L(psi)/L(psi0) is approximated by

    (1/B) sum_j p(y, s_j; psi) / p(y, s_j; psi0)

with s_j drawn from S | (y, d) at the reference psi0. The reference is
moved to each successive optimum until the optimization-scale parameters
stabilize. sigma2 and phi are optimized (and given Wald intervals) on the
log scale.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.special import logsumexp
from sklearn.base import BaseEstimator

from .covariance import CovParams, build_cov, distance_matrix, exponential_correlation
from .data import Dataset
from .exceptions import ConvergenceError, IllConditionedError
from .families import Binomial, get_family
from .glm import fit_glm
from .posterior import (
    GlgmParams,
    LaplaceMode,
    MalaSchedule,
    PosteriorDraws,
    _ConditionalModel,
    laplace_mode,
    sample_posterior,
)
from .validation import check_coords, check_outcomes, check_trials

_GRAD_STEP = 1e-5
_HESS_STEP = 5e-4
_MIN_ESS = 10.0
# The MC likelihood is only trustworthy near the reference, so each round's
# move is bounded on the optimization scale; the reference update recenters.
_TRUST_RADIUS = 1.5


@dataclass(frozen=True)
class McmlFit:
    """MCML estimates with Wald standard errors and 95% intervals.

    ``std_errors`` live on the optimization scale (beta natural,
    log sigma2, log phi); ``ci95`` rows are back-transformed to the
    natural scale. Row order: beta..., sigma2, phi.
    """

    params: GlgmParams
    param_names: tuple[str, ...]
    std_errors: np.ndarray
    ci95: np.ndarray
    mc_samples_used: int
    relative_likelihood_at_optimum: float
    reference_updates: int
    converged: bool
    diagnostics: dict = field(default_factory=dict)


def default_init(data: Dataset, family="binomial") -> GlgmParams:
    """Heuristic start: GLM coefficients, unit variance, quarter-diagonal range."""
    glm_fit = fit_glm(data, family)
    diag = float(np.hypot(np.ptp(data.coords[:, 0]), np.ptp(data.coords[:, 1])))
    return GlgmParams(beta=glm_fit.beta, cov=CovParams(sigma2=1.0, phi=diag / 4.0))


def laplace_approx_loglik(data: Dataset, family, params: GlgmParams) -> float:
    """Laplace approximation of the marginal log-likelihood (constants dropped).

        loglik(s_hat) - s_hat' Sigma^-1 s_hat / 2 - log|I + Sigma W(s_hat)| / 2
    """
    model = _ConditionalModel(family, data.y, data.m)
    sigma = build_cov(data.coords, params.cov)
    mode = laplace_mode(data, family, params)
    eta = data.design @ params.beta + mode.s_hat
    w = model.curvature(eta)
    root_w = np.sqrt(w)
    inner = np.eye(data.n) + root_w[:, None] * sigma.sigma * root_w[None, :]
    log_det = 2.0 * float(np.sum(np.log(np.diag(cholesky(inner, lower=True)))))
    quad = float(mode.s_hat @ sigma.solve(mode.s_hat))
    return float(model.loglik(eta)) - 0.5 * quad - 0.5 * log_det


def _calibrate_reference(data: Dataset, family, init: GlgmParams) -> GlgmParams:
    """Deterministic warm start: maximize the Laplace-approximate likelihood.

    Plain iterated MCML stalls when the first reference is far from the
    optimum (importance weights collapse); this pre-fit puts the reference
    within the Monte Carlo refinement's reach.
    """
    p = len(init.beta)

    def objective(theta):
        if np.max(np.abs(theta)) > 50.0:
            return 1e12
        try:
            return -laplace_approx_loglik(data, family, _from_theta(theta, p))
        except (np.linalg.LinAlgError, ConvergenceError):
            return 1e12

    res = minimize(
        objective,
        x0=_to_theta(init),
        method="Nelder-Mead",
        options={"maxiter": 600, "xatol": 1e-3, "fatol": 1e-6},
    )
    if not np.isfinite(res.fun) or res.fun >= 1e12:
        return init
    return _from_theta(res.x, p)


class _RelativeLogLik:
    """Monte Carlo relative log-likelihood for a fixed set of draws.

    theta = (beta..., log sigma2, log phi). Latent-prior factorizations are
    cached per (log sigma2, log phi) so coefficient perturbations reuse them.
    """

    def __init__(self, data: Dataset, draws: np.ndarray, ref_theta, fixed_cov=None):
        self.model = _ConditionalModel("binomial", data.y, data.m)
        self.design = data.design
        self.dist = distance_matrix(data.coords)
        self.draws = draws
        self.n = data.n
        self.p = data.design.shape[1]
        self.fixed_cov = fixed_cov  # (log sigma2, log phi) when held fixed
        self._chol_cache = {}
        self.ref_logjoint = self.joint_loglik(ref_theta)

    def _prior_pieces(self, log_sigma2, log_phi):
        key = (float(log_sigma2), float(log_phi))
        if key not in self._chol_cache:
            corr = exponential_correlation(self.dist, np.exp(log_phi))
            corr[np.diag_indices_from(corr)] += 1e-10
            try:
                chol = cholesky(corr, lower=True)
            except np.linalg.LinAlgError:
                # Line searches can wander to ranges where the correlation
                # matrix degenerates; report an impossible prior instead.
                self._chol_cache[key] = None
                return None
            half = solve_triangular(chol, self.draws.T, lower=True)
            quad = np.sum(half * half, axis=0)
            corr_logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
            self._chol_cache[key] = (quad, corr_logdet)
        return self._chol_cache[key]

    def joint_loglik(self, theta) -> np.ndarray:
        """log p(y, s_j; theta) per draw, constants in (y, m) dropped."""
        theta = np.asarray(theta, dtype=float)
        beta = theta[: self.p]
        if self.fixed_cov is not None:
            log_sigma2, log_phi = self.fixed_cov
        else:
            log_sigma2, log_phi = theta[self.p], theta[self.p + 1]
        sigma2 = np.exp(log_sigma2)
        pieces = self._prior_pieces(log_sigma2, log_phi)
        if pieces is None:
            return np.full(self.draws.shape[0], -np.inf)
        eta = self.design @ beta + self.draws
        cond = self.model.loglik(eta)
        quad, corr_logdet = pieces
        prior = -0.5 * (self.n * log_sigma2 + corr_logdet + quad / sigma2)
        return cond + prior

    def __call__(self, theta) -> float:
        diff = self.joint_loglik(theta) - self.ref_logjoint
        return float(logsumexp(diff) - np.log(diff.size))

    def gradient(self, theta) -> np.ndarray:
        grad = np.empty_like(np.asarray(theta, dtype=float))
        for i in range(grad.size):
            shift = np.zeros_like(grad)
            shift[i] = _GRAD_STEP
            grad[i] = (self(theta + shift) - self(theta - shift)) / (2.0 * _GRAD_STEP)
        return grad

    def hessian(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        k = theta.size
        h = _HESS_STEP * np.maximum(1.0, np.abs(theta))
        hess = np.empty((k, k))
        f0 = self(theta)
        for i in range(k):
            ei = np.zeros(k)
            ei[i] = h[i]
            hess[i, i] = (self(theta + ei) - 2.0 * f0 + self(theta - ei)) / h[i] ** 2
            for j in range(i + 1, k):
                ej = np.zeros(k)
                ej[j] = h[j]
                hess[i, j] = hess[j, i] = (
                    self(theta + ei + ej)
                    - self(theta + ei - ej)
                    - self(theta - ei + ej)
                    + self(theta - ei - ej)
                ) / (4.0 * h[i] * h[j])
        return hess

    def effective_sample_size(self, theta) -> float:
        logw = self.joint_loglik(theta) - self.ref_logjoint
        return float(np.exp(2.0 * logsumexp(logw) - logsumexp(2.0 * logw)))


def _to_theta(params: GlgmParams) -> np.ndarray:
    return np.concatenate(
        [params.beta, [np.log(params.cov.sigma2), np.log(params.cov.phi)]]
    )


def _from_theta(theta, p) -> GlgmParams:
    return GlgmParams(
        beta=np.asarray(theta[:p], dtype=float),
        cov=CovParams(sigma2=float(np.exp(theta[p])), phi=float(np.exp(theta[p + 1]))),
    )


def fit_mcml(
    data: Dataset,
    family="binomial",
    init: GlgmParams | None = None,
    schedule: MalaSchedule | None = None,
    max_reference_updates=5,
    param_tol=0.01,
    fix_cov=False,
    calibrate=True,
) -> McmlFit:
    """Fit (beta, sigma2, phi) by iterated Monte Carlo maximum likelihood.

    Each round draws latent fields at the current reference, maximizes the
    Monte Carlo relative log-likelihood by quasi-Newton with central-
    difference gradients, then moves the reference. Stops when the sup-norm
    change of the optimization-scale parameters drops below ``param_tol``
    or after ``max_reference_updates`` rounds. With ``fix_cov=True`` the
    covariance parameters are held at their initial values and only the
    coefficients are estimated. Unless ``calibrate=False``, the first
    reference is warm-started at the Laplace-approximate ML point.
    """
    if get_family(family).kind != "binomial":
        raise ValueError(
            "the Monte Carlo fitting path supports the binomial family only; "
            "use the exact gaussian fit for linear models"
        )
    if schedule is None:
        raise ValueError("an explicit MalaSchedule (with seed) is required")
    if max_reference_updates < 1:
        raise ValueError("max_reference_updates must be at least 1")
    if init is None:
        init = default_init(data, family)

    # Standardize covariates internally: the optimizer and the finite
    # differences need comparably scaled coordinates. Estimates, SEs and
    # CIs are mapped back through the linear transform below.
    p = data.design.shape[1]
    shift = np.zeros(p)
    scale = np.ones(p)
    if p > 1:
        shift[1:] = data.covariates.mean(axis=0)
        scale[1:] = data.covariates.std(axis=0)
        scale[scale == 0.0] = 1.0
    std_data = Dataset(
        coords=data.coords,
        m=data.m.astype(int),
        y=data.y,
        covariates=(data.covariates - shift[1:]) / scale[1:] if p > 1 else data.covariates,
        covariate_names=data.covariate_names,
        family_kind=data.family_kind,
        site_ids=data.site_ids,
    )
    # beta_natural = T @ beta_standardized
    T = np.eye(p)
    if p > 1:
        T[0, 1:] = -shift[1:] / scale[1:]
        T[np.arange(1, p), np.arange(1, p)] = 1.0 / scale[1:]
    beta_std_init = np.linalg.solve(T, init.beta)
    init = GlgmParams(beta=beta_std_init, cov=init.cov)

    if calibrate and not fix_cov:
        init = _calibrate_reference(std_data, family, init)

    full0 = _to_theta(init)
    fixed = (float(full0[p]), float(full0[p + 1])) if fix_cov else None
    theta0 = full0[:p] if fix_cov else full0

    def to_params(theta):
        theta = np.asarray(theta, dtype=float)
        if fix_cov:
            return GlgmParams(beta=theta, cov=init.cov)
        return _from_theta(theta, p)

    def to_natural(params_std: GlgmParams) -> GlgmParams:
        return GlgmParams(beta=T @ params_std.beta, cov=params_std.cov)

    updates = 0
    converged = False
    accept_rates = []
    loglik = None
    res = None
    for update in range(max_reference_updates):
        draw_seed = np.random.SeedSequence([int(schedule.seed), update])
        draws = sample_posterior(
            std_data,
            family,
            to_params(theta0),
            MalaSchedule(
                seed=draw_seed,
                burn_in=schedule.burn_in,
                thin=schedule.thin,
                n_samples=schedule.n_samples,
            ),
        )
        accept_rates.append(draws.acceptance_rate)
        loglik = _RelativeLogLik(std_data, draws.draws, theta0, fixed_cov=fixed)
        # Shrink the round's trust radius until the draws can support the
        # solution: a move the importance weights cannot cover is noise.
        trust = _TRUST_RADIUS
        min_ess = max(_MIN_ESS, 0.05 * schedule.n_samples)
        for _ in range(6):
            res = minimize(
                lambda th: -loglik(th),
                x0=theta0,
                jac=lambda th: -loglik.gradient(th),
                method="L-BFGS-B",
                bounds=[(t - trust, t + trust) for t in theta0],
                options={"maxiter": 200},
            )
            if loglik.effective_sample_size(res.x) >= min_ess:
                break
            trust /= 2.0
        theta_hat = res.x
        updates += 1
        delta = float(np.max(np.abs(theta_hat - theta0)))
        theta0 = theta_hat
        if delta < param_tol:
            converged = True
            break

    ess = loglik.effective_sample_size(theta0)
    if ess < _MIN_ESS:
        raise ConvergenceError(
            f"reference draws cannot support the optimum (effective sample size "
            f"{ess:.1f} of {schedule.n_samples}); increase n_samples or burn_in"
        )
    optimum_value = float(-res.fun)

    # Curvature is estimated from a fresh draw set referenced AT the
    # estimate: importance weights are uniform there, so the finite
    # differences probe a fully supported surface.
    final_draws = sample_posterior(
        std_data,
        family,
        to_params(theta0),
        MalaSchedule(
            seed=np.random.SeedSequence([int(schedule.seed), updates]),
            burn_in=schedule.burn_in,
            thin=schedule.thin,
            n_samples=schedule.n_samples,
        ),
    )
    loglik = _RelativeLogLik(std_data, final_draws.draws, theta0, fixed_cov=fixed)
    hess = loglik.hessian(theta0)
    try:
        cov = np.linalg.inv(-hess)
    except np.linalg.LinAlgError:
        cov = None
    if cov is None or np.any(np.diag(cov) <= 0):
        raise IllConditionedError(
            "degenerate Hessian at the MCML optimum "
            f"(condition number {np.linalg.cond(hess):.3e})"
        )
    k = theta0.size
    unstd = np.eye(k)
    unstd[:p, :p] = T
    cov = unstd @ cov @ unstd.T
    est = unstd @ theta0  # logs pass through unchanged
    se = np.sqrt(np.diag(cov))
    ci = np.column_stack([est - 1.96 * se, est + 1.96 * se])
    names = tuple(f"beta_{name}" for name in ("0",) + data.covariate_names)
    if not fix_cov:
        ci[p:] = np.exp(ci[p:])  # back-transform log sigma2, log phi
        names = names + ("sigma2", "phi")
    return McmlFit(
        params=to_natural(to_params(theta0)),
        param_names=names,
        std_errors=se,
        ci95=ci,
        mc_samples_used=(updates + 1) * schedule.n_samples,
        relative_likelihood_at_optimum=optimum_value,
        reference_updates=updates,
        converged=converged,
        diagnostics={
            "acceptance_rates": accept_rates,
            "optimizer_status": int(res.status) if res is not None else -1,
            "optimizer_message": str(res.message) if res is not None else "",
            "effective_sample_size": ess,
            "hessian_condition_number": float(np.linalg.cond(hess)),
            "final_parameter_change": delta,
        },
    )


class BinomialGLGM(BaseEstimator):
    """Binomial-logit spatial model fitted by Monte Carlo maximum likelihood.

    Parameters
    ----------
    sigma2_init, phi_init : float, optional
        Starting covariance parameters; defaults come from the data
        heuristic (unit variance, quarter of the bounding-box diagonal).
    burn_in, thin, n_samples : int
        Chain schedule for the latent-field sampler.
    max_reference_updates : int, default=5
        Reference-distribution refresh budget.
    param_tol : float, default=0.01
        Sup-norm stopping tolerance on the optimization scale.
    random_state : int
        Mandatory seed; fitting is Monte Carlo.
    """

    def __init__(
        self,
        sigma2_init=None,
        phi_init=None,
        burn_in=10_000,
        thin=8,
        n_samples=1_000,
        max_reference_updates=5,
        param_tol=0.01,
        random_state=None,
    ):
        self.sigma2_init = sigma2_init
        self.phi_init = phi_init
        self.burn_in = burn_in
        self.thin = thin
        self.n_samples = n_samples
        self.max_reference_updates = max_reference_updates
        self.param_tol = param_tol
        self.random_state = random_state

    def _dataset(self, X, y, coords, trials):
        coords = check_coords(coords)
        n = coords.shape[0]
        m = check_trials(trials, n, "binomial")
        y = check_outcomes(np.asarray(y, dtype=float).ravel(), m, "binomial")
        X = np.empty((n, 0)) if X is None else np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        return Dataset(coords=coords, m=m, y=y, covariates=X, family_kind="binomial")

    def fit(self, X, y, coords=None, trials=None):
        """Fit from covariates X (no intercept column), counts y, site
        coordinates and binomial denominators."""
        if self.random_state is None:
            raise ValueError("random_state is required: MCML fitting is stochastic")
        if coords is None or trials is None:
            raise ValueError("coords and trials are required fit parameters")
        data = self._dataset(X, y, coords, trials)
        init = None
        if self.sigma2_init is not None or self.phi_init is not None:
            base = default_init(data)
            init = GlgmParams(
                beta=base.beta,
                cov=CovParams(
                    sigma2=self.sigma2_init or base.cov.sigma2,
                    phi=self.phi_init or base.cov.phi,
                ),
            )
        result = fit_mcml(
            data,
            init=init,
            schedule=MalaSchedule(
                seed=self.random_state,
                burn_in=self.burn_in,
                thin=self.thin,
                n_samples=self.n_samples,
            ),
            max_reference_updates=self.max_reference_updates,
            param_tol=self.param_tol,
        )
        self.mcml_fit_ = result
        self.beta_ = result.params.beta
        self.intercept_ = float(result.params.beta[0])
        self.coef_ = result.params.beta[1:]
        self.sigma2_ = result.params.cov.sigma2
        self.phi_ = result.params.cov.phi
        self.std_errors_ = result.std_errors
        self.ci95_ = result.ci95
        self.converged_ = result.converged
        self._train_data = data
        return self

    def sample_posterior(self, schedule: MalaSchedule | None = None) -> PosteriorDraws:
        """Draw latent fields at the fitted parameters on the training data."""
        if schedule is None:
            schedule = MalaSchedule(
                seed=self.random_state,
                burn_in=self.burn_in,
                thin=self.thin,
                n_samples=self.n_samples,
            )
        return sample_posterior(
            self._train_data, "binomial", self.mcml_fit_.params, schedule
        )

    def predict(self, X, latent=None):
        """Mean-scale predictions expit([1, X] beta + latent).

        Intercept-only models take X of shape (n, 0).
        """
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        design = np.column_stack([np.ones(X.shape[0]), X])
        eta = design @ self.beta_
        if latent is not None:
            eta = eta + np.asarray(latent, dtype=float)
        return Binomial().linkinv(eta)
