"""Exponential-family variance and link functions.

Each family couples a variance function V(mu) with its canonical link:
gaussian/identity, binomial/logit, poisson/log. ``QuasiFamily`` covers
quasi-models where only the variance function (and a link) is specified,
with no full likelihood.
"""

from abc import ABC, abstractmethod
from typing import Callable, Optional

import numpy as np
from scipy.special import expit, logit

from .exceptions import DomainError

# Central-difference step for quasi variance derivatives.
_FD_STEP = 1e-6


def _identity(x):
    return np.asarray(x, dtype=float)


def _log(mu):
    return np.log(np.asarray(mu, dtype=float))


def _exp(eta):
    return np.exp(np.asarray(eta, dtype=float))


# expit saturates smoothly (no overflow) for |eta| up to the float64 range.
_LINK_PAIRS = {
    "identity": (_identity, _identity),
    "logit": (logit, expit),
    "log": (_log, _exp),
}


class Family(ABC):
    """Base class tying together link, variance and mean-domain checks.

    Mean values live on the proportion/rate scale: binomial means are
    probabilities in (0, 1), never counts.
    """

    kind: str
    link: str
    # Closed interval admissible for variation endpoints; the open interior
    # is the mean domain proper (observed proportions may sit on the edge).
    endpoint_domain: tuple[float, float]

    def linkfun(self, mu):
        """Link function eta = g(mu)."""
        return _LINK_PAIRS[self.link][0](mu)

    def linkinv(self, eta):
        """Inverse link mu = g^-1(eta)."""
        return _LINK_PAIRS[self.link][1](eta)

    @abstractmethod
    def variance(self, mu):
        """Variance function V(mu)."""

    @abstractmethod
    def variance_deriv(self, mu):
        """Derivative V'(mu) used by the arc-length functional."""

    def check_endpoints(self, *values) -> None:
        """Raise DomainError if any value leaves the closed endpoint domain."""
        lo, hi = self.endpoint_domain
        for v in values:
            arr = np.asarray(v, dtype=float)
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"{self.kind}: non-finite endpoint {v!r}")
            if np.any(arr < lo) or np.any(arr > hi):
                raise DomainError(
                    f"{self.kind}: endpoint outside domain [{lo}, {hi}]"
                )

    def check_means(self, mu) -> None:
        """Raise DomainError if a mean leaves the open mean domain."""
        lo, hi = self.endpoint_domain
        arr = np.asarray(mu, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise DomainError(f"{self.kind}: non-finite mean")
        if np.any(arr <= lo) or np.any(arr >= hi):
            raise DomainError(
                f"{self.kind}: mean outside open domain ({lo}, {hi})"
            )

    def __repr__(self):
        return f"{type(self).__name__}()"


class Gaussian(Family):
    """Gaussian family, identity link, constant variance."""

    kind = "gaussian"
    link = "identity"
    endpoint_domain = (-np.inf, np.inf)

    def variance(self, mu):
        return np.ones_like(np.asarray(mu, dtype=float))

    def variance_deriv(self, mu):
        return np.zeros_like(np.asarray(mu, dtype=float))


class Binomial(Family):
    """Binomial family, logit link, V(mu) = mu(1 - mu) on the proportion scale."""

    kind = "binomial"
    link = "logit"
    endpoint_domain = (0.0, 1.0)

    def variance(self, mu):
        mu = np.asarray(mu, dtype=float)
        return mu * (1.0 - mu)

    def variance_deriv(self, mu):
        return 1.0 - 2.0 * np.asarray(mu, dtype=float)


class Poisson(Family):
    """Poisson family, log link, V(mu) = mu."""

    kind = "poisson"
    link = "log"
    endpoint_domain = (0.0, np.inf)

    def variance(self, mu):
        return np.asarray(mu, dtype=float)

    def variance_deriv(self, mu):
        return np.ones_like(np.asarray(mu, dtype=float))


class QuasiFamily(Family):
    """Quasi-model defined by a user-supplied variance function.

    Parameters
    ----------
    variance_fn : callable
        V(mu), vectorized over numpy arrays, nonnegative on the domain.
    variance_deriv_fn : callable, optional
        Analytic V'(mu). When omitted, V' is approximated by central
        differences with step 1e-6 * max(1, |mu|).
    link : str
        One of "identity", "logit", "log".
    endpoint_domain : tuple of float
        Closed interval of admissible variation endpoints.
    """

    kind = "quasi"

    def __init__(
        self,
        variance_fn: Callable,
        variance_deriv_fn: Optional[Callable] = None,
        link: str = "identity",
        endpoint_domain: tuple[float, float] = (-np.inf, np.inf),
    ):
        if link not in _LINK_PAIRS:
            raise ValueError(f"unsupported link {link!r}")
        self.link = link
        self.endpoint_domain = (float(endpoint_domain[0]), float(endpoint_domain[1]))
        self._variance_fn = variance_fn
        self._variance_deriv_fn = variance_deriv_fn

    def variance(self, mu):
        return np.asarray(self._variance_fn(np.asarray(mu, dtype=float)), dtype=float)

    def variance_deriv(self, mu):
        if self._variance_deriv_fn is not None:
            return np.asarray(
                self._variance_deriv_fn(np.asarray(mu, dtype=float)), dtype=float
            )
        mu = np.asarray(mu, dtype=float)
        h = _FD_STEP * np.maximum(1.0, np.abs(mu))
        return (self._variance_fn(mu + h) - self._variance_fn(mu - h)) / (2.0 * h)

    def __repr__(self):
        return f"QuasiFamily(link={self.link!r})"


_NAMED = {"gaussian": Gaussian, "binomial": Binomial, "poisson": Poisson}


def get_family(family) -> Family:
    """Resolve a family name or pass through a Family instance."""
    if isinstance(family, Family):
        return family
    name = str(family).lower()
    if name not in _NAMED:
        raise ValueError(
            f"unknown family {family!r}; expected one of {sorted(_NAMED)} "
            "or a Family instance"
        )
    return _NAMED[name]()
