"""Variance-arc-length R² for GLMs and generalized linear geostatistical models."""

from .covariance import CovMatrix, CovParams, build_cov, gp_sample
from .data import Dataset, read_dataset, write_dataset
from .exceptions import (
    ConvergenceError,
    DomainError,
    GeorsqError,
    IllConditionedError,
    QuadratureError,
    SamplerDiagnosticError,
    SchemaError,
    UndefinedR2Error,
)
from .families import Binomial, Family, Gaussian, Poisson, QuasiFamily, get_family
from .glm import GLM, GlmFit, baseline_prediction, fit_glm, r2_glm
from .variation import CvResult, c_v, cv_total, cv_values

__version__ = "0.1.0"

__all__ = [
    "GLM",
    "Binomial",
    "CovMatrix",
    "CovParams",
    "ConvergenceError",
    "CvResult",
    "Dataset",
    "DomainError",
    "Family",
    "Gaussian",
    "GeorsqError",
    "GlmFit",
    "IllConditionedError",
    "Poisson",
    "QuadratureError",
    "QuasiFamily",
    "SamplerDiagnosticError",
    "SchemaError",
    "UndefinedR2Error",
    "baseline_prediction",
    "build_cov",
    "c_v",
    "cv_total",
    "cv_values",
    "fit_glm",
    "get_family",
    "gp_sample",
    "r2_glm",
    "read_dataset",
    "write_dataset",
]
