"""Input validation helpers shared by estimators, datasets and the CLI."""

import numpy as np
from scipy.spatial.distance import pdist

from .exceptions import SchemaError


def as_float_2d(x, name="X"):
    """Coerce to a 2-d float array, rejecting non-finite entries."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise SchemaError(f"{name} must be 2-dimensional, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        rows = np.unique(np.nonzero(~np.isfinite(arr))[0])
        raise SchemaError(f"{name} has non-finite values in rows {rows.tolist()}")
    return arr


def as_float_1d(x, name="y"):
    """Coerce to a 1-d float array, rejecting non-finite entries."""
    arr = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(arr)):
        rows = np.nonzero(~np.isfinite(arr))[0]
        raise SchemaError(f"{name} has non-finite values at rows {rows.tolist()}")
    return arr


def check_coords(coords, n=None):
    """Validate an n x 2 planar coordinate array with distinct sites."""
    coords = as_float_2d(coords, name="coords")
    if coords.shape[1] != 2:
        raise SchemaError(f"coords must have 2 columns, got {coords.shape[1]}")
    if n is not None and coords.shape[0] != n:
        raise SchemaError(f"coords has {coords.shape[0]} rows, expected {n}")
    if coords.shape[0] >= 2 and min_pairwise_distance(coords) <= 0.0:
        raise SchemaError("duplicate coordinates: minimum pairwise distance is 0")
    return coords


def min_pairwise_distance(coords) -> float:
    return float(np.min(pdist(np.asarray(coords, dtype=float))))


def check_design(D, n=None):
    """Validate a full-column-rank design matrix with a leading intercept."""
    D = as_float_2d(D, name="design matrix")
    if n is not None and D.shape[0] != n:
        raise SchemaError(f"design matrix has {D.shape[0]} rows, expected {n}")
    if not np.all(D[:, 0] == 1.0):
        raise SchemaError("design matrix must carry a leading intercept column of ones")
    if np.linalg.matrix_rank(D) < D.shape[1]:
        raise SchemaError("design matrix is rank deficient")
    return D


def check_trials(m, n, family_kind):
    """Validate offsets (binomial denominators / exposures) as positive integers."""
    arr = np.asarray(m)
    if arr.shape == ():
        arr = np.full(n, arr)
    arr = as_float_1d(arr, name="m")
    if arr.size != n:
        raise SchemaError(f"m has {arr.size} entries, expected {n}")
    if np.any(arr <= 0) or np.any(arr != np.round(arr)):
        bad = np.nonzero((arr <= 0) | (arr != np.round(arr)))[0]
        raise SchemaError(f"m must be positive integers; bad rows {bad.tolist()}")
    return arr.astype(float)


def check_outcomes(y, m, family_kind):
    """Validate outcomes against the family: binomial counts within [0, m]."""
    y = as_float_1d(y, name="y")
    if family_kind == "binomial":
        bad = np.nonzero((y < 0) | (y > m) | (y != np.round(y)))[0]
        if bad.size:
            raise SchemaError(
                f"binomial outcomes must be integers in [0, m]; bad rows {bad.tolist()}"
            )
    elif family_kind == "poisson":
        bad = np.nonzero((y < 0) | (y != np.round(y)))[0]
        if bad.size:
            raise SchemaError(f"poisson outcomes must be nonnegative integers; bad rows {bad.tolist()}")
    return y


def looks_like_lonlat(coords) -> bool:
    """True when every coordinate sits inside [-180, 180] x [-90, 90]."""
    coords = np.asarray(coords, dtype=float)
    return bool(
        np.all(np.abs(coords[:, 0]) <= 180.0) and np.all(np.abs(coords[:, 1]) <= 90.0)
    )
