"""Variance-arc-length functional.

The unit of variation between two mean values a and b is the squared arc
length of the variance function:

    c_V(a, b) = ( integral_a^b sqrt(1 + V'(u)^2) du )^2

Closed forms exist for the three named families; quasi-families fall back
to adaptive Simpson quadrature. With a constant variance function the
functional collapses to the squared difference (b - a)^2, so sums of
c_V terms generalize residual sums of squares.
"""

from dataclasses import dataclass
import math

import numpy as np

from .exceptions import QuadratureError
from .families import Family, get_family

DEFAULT_TOL = 1e-10
MAX_DEPTH = 50


@dataclass(frozen=True)
class CvResult:
    """Value of c_V(a, b) plus how it was obtained.

    ``abs_error_bound`` is 0 for closed forms; for quadrature it bounds the
    error of the squared value, propagated from the integral tolerance.
    """

    value: float
    abs_error_bound: float
    method: str  # "closed_form" or "quadrature"


def _antideriv_binomial(t):
    # F(t) = t*sqrt(1+t^2) + asinh(t); F'/2 integrates sqrt(1+t^2).
    return t * np.hypot(1.0, t) + np.arcsinh(t)


def _arc_gaussian(a, b):
    return np.abs(np.asarray(b, dtype=float) - a)


def _arc_poisson(a, b):
    return math.sqrt(2.0) * np.abs(np.asarray(b, dtype=float) - a)


def _arc_binomial(a, b):
    # Substituting t = 1 - 2u turns the integrand into sqrt(1 + t^2)/2.
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.abs(_antideriv_binomial(1.0 - 2.0 * a) - _antideriv_binomial(1.0 - 2.0 * b)) / 4.0


_ARC_CLOSED = {
    "gaussian": _arc_gaussian,
    "poisson": _arc_poisson,
    "binomial": _arc_binomial,
}


def adaptive_simpson(f, a, b, tol=DEFAULT_TOL, max_depth=MAX_DEPTH):
    """Integrate f over [a, b] by adaptive Simpson bisection.

    Returns (value, error_bound). Raises QuadratureError when an interval
    still misses its tolerance share at ``max_depth`` bisections; the
    result is never silently truncated.
    """
    if a == b:
        return 0.0, 0.0

    def simpson(lo, flo, hi, fhi):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        return mid, fmid, (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    def recurse(lo, flo, hi, fhi, whole, mid, fmid, eps, depth):
        lmid, flmid, left = simpson(lo, flo, mid, fmid)
        rmid, frmid, right = simpson(mid, fmid, hi, fhi)
        delta = left + right - whole
        if abs(delta) <= 15.0 * eps:
            return left + right + delta / 15.0, abs(delta) / 15.0
        if depth >= max_depth:
            raise QuadratureError(
                f"adaptive Simpson: interval [{lo}, {hi}] not converged after "
                f"{max_depth} bisections (residual {abs(delta):.3e})"
            )
        lval, lerr = recurse(lo, flo, mid, fmid, left, lmid, flmid, eps / 2.0, depth + 1)
        rval, rerr = recurse(mid, fmid, hi, fhi, right, rmid, frmid, eps / 2.0, depth + 1)
        return lval + rval, lerr + rerr

    fa, fb = f(a), f(b)
    mid, fmid, whole = simpson(a, fa, b, fb)
    return recurse(a, fa, b, fb, whole, mid, fmid, tol, 0)


def arc_length(family, a, b, tol=DEFAULT_TOL, method="auto"):
    """Arc length of the variance function between means a and b.

    Returns (length, error_bound, method_used). The length is oriented
    positive regardless of endpoint order.
    """
    family = get_family(family)
    closed = _ARC_CLOSED.get(family.kind)
    if method == "auto":
        method = "closed_form" if closed is not None else "quadrature"
    if method == "closed_form":
        if closed is None:
            raise ValueError(f"no closed-form arc length for kind {family.kind!r}")
        return float(closed(a, b)), 0.0, "closed_form"
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")

    def integrand(u):
        return math.hypot(1.0, float(family.variance_deriv(u)))

    lo, hi = min(a, b), max(a, b)
    value, err = adaptive_simpson(integrand, lo, hi, tol=tol)
    return value, err, "quadrature"


def c_v(family, a, b, tol=DEFAULT_TOL, method="auto") -> CvResult:
    """Squared variance arc length between mean values a and b.

    Symmetric in (a, b) and exactly zero when the endpoints coincide.
    Endpoints must lie in the family's closed endpoint domain (binomial:
    [0, 1] proportions).
    """
    family = get_family(family)
    a = float(a)
    b = float(b)
    family.check_endpoints(a, b)
    length, err, used = arc_length(family, a, b, tol=tol, method=method)
    # |L^2 - (L+e)^2| <= 2|L|e + e^2
    return CvResult(length * length, 2.0 * length * err + err * err, used)


def cv_values(family, observed, predicted) -> np.ndarray:
    """Vectorized c_V between observed and predicted means (closed forms).

    ``observed`` and ``predicted`` broadcast together; quasi-families are
    evaluated elementwise by quadrature.
    """
    family = get_family(family)
    family.check_endpoints(observed, predicted)
    closed = _ARC_CLOSED.get(family.kind)
    if closed is not None:
        arc = closed(observed, predicted)
        return arc * arc
    obs, pred = np.broadcast_arrays(
        np.asarray(observed, dtype=float), np.asarray(predicted, dtype=float)
    )
    out = np.empty(obs.shape, dtype=float)
    flat_o, flat_p, flat_out = obs.ravel(), pred.ravel(), out.ravel()
    for i in range(flat_o.size):
        flat_out[i] = c_v(family, flat_o[i], flat_p[i]).value
    return out


def cv_total(family, observed, predicted) -> float:
    """Sum of c_V(observed_i, predicted_i) over all sites."""
    return float(np.sum(cv_values(family, observed, predicted)))
