"""Monte Carlo coefficients of determination and prediction-SE comparison.

For each retained latent-field draw the total variation

    T_j = sum_i c_V(y_i, g^-1(d_i' beta + s_j(x_i)))

is averaged over draws; the coefficient is one minus that average divided
by the intercept-only baseline variation. Parameters are plugged in: no
estimation uncertainty is propagated. Monte Carlo standard errors use
batch means (20 batches) because chain draws are autocorrelated.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Dataset
from .exceptions import UndefinedR2Error
from .families import get_family
from .glm import baseline_prediction, fit_glm, r2_glm
from .posterior import GlgmParams, PosteriorDraws
from .variation import cv_values

N_BATCHES = 20


@dataclass(frozen=True)
class R2Report:
    """Coefficients for one dataset: GLM, spatial-model and partial."""

    r2_glm: float
    r2_glgm: float
    r2_glgm_mc_se: Optional[float]
    partial_r2: Optional[float]
    partial_r2_mc_se: Optional[float]
    total_variation: float
    baseline_variation: float
    n_samples: int
    seed: int
    r2_glgm_exact: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "r2_glm": self.r2_glm,
            "r2_glgm": self.r2_glgm,
            "r2_glgm_mc_se": self.r2_glgm_mc_se,
            "partial_r2": self.partial_r2,
            "partial_r2_mc_se": self.partial_r2_mc_se,
            "total_variation": self.total_variation,
            "baseline_variation": self.baseline_variation,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "r2_glgm_exact": self.r2_glgm_exact,
        }


@dataclass(frozen=True)
class SeComparison:
    """Per-site prediction standard errors, with vs without covariates."""

    site_ids: tuple
    coords: np.ndarray
    se_without: np.ndarray
    se_with: np.ndarray

    @property
    def relative_reduction(self) -> np.ndarray:
        """1 - se_with/se_without per site (0 where the baseline SE is 0)."""
        out = np.zeros_like(self.se_without)
        mask = self.se_without > 0
        out[mask] = 1.0 - self.se_with[mask] / self.se_without[mask]
        return out

    @property
    def max_relative_reduction(self) -> float:
        return float(np.max(self.relative_reduction))


def batch_means_se(values, n_batches=N_BATCHES) -> Optional[float]:
    """Batch-means standard error of the mean of an autocorrelated sequence.

    Returns None when fewer than two values are available. With fewer
    values than batches, every value is its own batch.
    """
    values = np.asarray(values, dtype=float)
    b = values.size
    if b < 2:
        return None
    k = min(n_batches, b)
    size = b // k
    means = values[: k * size].reshape(k, size).mean(axis=1)
    return float(np.std(means, ddof=1) / np.sqrt(k))


def _draw_means(data: Dataset, family, params: GlgmParams, draws: PosteriorDraws):
    family = get_family(family)
    if draws.draws.shape[1] != data.n:
        raise ValueError(
            f"draws cover {draws.draws.shape[1]} sites but the dataset has {data.n}"
        )
    if len(params.beta) != data.design.shape[1]:
        raise ValueError(
            f"beta has {len(params.beta)} coefficients but the design has "
            f"{data.design.shape[1]} columns"
        )
    eta = data.design @ params.beta + draws.draws
    return family.linkinv(eta)


def total_variation_mc(
    data: Dataset, family, params: GlgmParams, draws: PosteriorDraws
) -> tuple[float, Optional[float]]:
    """Mean and batch-means MC standard error of the per-draw total variation."""
    family = get_family(family)
    mu = _draw_means(data, family, params, draws)
    per_draw = np.sum(cv_values(family, data.proportions[None, :], mu), axis=1)
    return float(per_draw.mean()), batch_means_se(per_draw)


def r2_glgm_mc(
    data: Dataset, family, params: GlgmParams, draws: PosteriorDraws
) -> tuple[float, Optional[float]]:
    """Monte Carlo coefficient of determination and its MC standard error."""
    family = get_family(family)
    denom = _baseline_variation(data, family)
    mean, se = total_variation_mc(data, family, params, draws)
    return 1.0 - mean / denom, None if se is None else se / denom


def _baseline_variation(data: Dataset, family) -> float:
    yhat0 = baseline_prediction(data, family)
    denom = float(np.sum(cv_values(family, data.proportions, yhat0)))
    if denom == 0.0:
        raise UndefinedR2Error("all observations identical: baseline variation is zero")
    return denom


def partial_r2(
    data: Dataset,
    family,
    params_with: GlgmParams,
    draws_with: PosteriorDraws,
    params_without: GlgmParams,
    draws_without: PosteriorDraws,
) -> tuple[float, Optional[float]]:
    """Fraction of variation explained by the covariates beyond the field.

    The denominator averages total variation under the intercept-only
    model, whose draws come from its own predictive distribution.
    """
    if len(params_without.beta) != 1:
        raise ValueError("the reference model must be intercept-only (one coefficient)")
    num, num_se = total_variation_mc(data, family, params_with, draws_with)
    den, den_se = total_variation_mc(
        data.intercept_only(), family, params_without, draws_without
    )
    if den == 0.0:
        raise UndefinedR2Error("intercept-only expected variation is zero")
    value = 1.0 - num / den
    if num_se is None or den_se is None:
        return value, None
    se = np.hypot(num_se / den, num * den_se / den**2)
    return value, float(se)


def prediction_se(
    data: Dataset, family, params: GlgmParams, draws: PosteriorDraws
) -> np.ndarray:
    """Per-site standard deviation over draws of the mean-scale prediction."""
    mu = _draw_means(data, family, params, draws)
    if mu.shape[0] < 2:
        raise ValueError("at least two draws are needed for a standard error")
    return np.std(mu, axis=0, ddof=1)


def se_comparison(
    data: Dataset,
    family,
    params_with: GlgmParams,
    draws_with: PosteriorDraws,
    params_without: GlgmParams,
    draws_without: PosteriorDraws,
) -> SeComparison:
    """Assemble the with/without-covariates prediction-SE comparison."""
    se_with = prediction_se(data, family, params_with, draws_with)
    se_without = prediction_se(
        data.intercept_only(), family, params_without, draws_without
    )
    return SeComparison(
        site_ids=data.site_ids,
        coords=data.coords,
        se_without=se_without,
        se_with=se_with,
    )


def compute_r2_report(
    data: Dataset,
    family,
    params: GlgmParams,
    draws: PosteriorDraws,
    params_without: Optional[GlgmParams] = None,
    draws_without: Optional[PosteriorDraws] = None,
    seed: int = 0,
    r2_glgm_exact: Optional[float] = None,
) -> R2Report:
    """Bundle the GLM, spatial and (optionally) partial coefficients."""
    family = get_family(family)
    glm_value = r2_glm(data, family, fit_glm(data, family))
    denom = _baseline_variation(data, family)
    mean, se = total_variation_mc(data, family, params, draws)
    part = part_se = None
    if params_without is not None and draws_without is not None:
        part, part_se = partial_r2(
            data, family, params, draws, params_without, draws_without
        )
    return R2Report(
        r2_glm=glm_value,
        r2_glgm=1.0 - mean / denom,
        r2_glgm_mc_se=None if se is None else se / denom,
        partial_r2=part,
        partial_r2_mc_se=part_se,
        total_variation=mean,
        baseline_variation=denom,
        n_samples=draws.n_samples,
        seed=seed,
        r2_glgm_exact=r2_glgm_exact,
    )
