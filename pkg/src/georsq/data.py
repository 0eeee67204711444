"""Site-level dataset container and the CSV interchange schema.

CSV schema: header row with columns ``id, x1, x2, m, y`` plus any named
covariate columns, UTF-8, decimal point. Lines starting with ``#`` are
metadata comments and are ignored on read. Missing values are rejected;
there is no imputation.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import SchemaError
from .families import get_family
from .validation import (
    check_coords,
    check_design,
    check_outcomes,
    check_trials,
)

REQUIRED_COLUMNS = ("id", "x1", "x2", "m", "y")


@dataclass(frozen=True)
class Dataset:
    """Coordinates, offsets, outcomes and covariates for one analysis.

    ``covariates`` excludes the intercept; the full design matrix with its
    leading column of ones is exposed as ``design``. Binomial outcomes are
    counts; ``proportions`` gives the mean-scale observations y/m.
    """

    coords: np.ndarray
    m: np.ndarray
    y: np.ndarray
    covariates: np.ndarray
    covariate_names: tuple[str, ...] = ()
    family_kind: str = "gaussian"
    site_ids: tuple = ()

    def __post_init__(self):
        coords = check_coords(self.coords)
        n = coords.shape[0]
        if n < 3:
            raise SchemaError(f"need at least 3 sites, got {n}")
        m = check_trials(self.m, n, self.family_kind)
        if np.asarray(self.y).size != n:
            raise SchemaError(f"y has {np.asarray(self.y).size} entries, expected {n}")
        y = check_outcomes(self.y, m, self.family_kind)
        cov = np.asarray(self.covariates, dtype=float)
        if cov.size == 0:
            cov = np.empty((n, 0))
        if cov.ndim == 1:
            cov = cov.reshape(-1, 1)
        if cov.shape[0] != n:
            raise SchemaError(f"covariates have {cov.shape[0]} rows, expected {n}")
        names = tuple(self.covariate_names) or tuple(
            f"d{j + 1}" for j in range(cov.shape[1])
        )
        if len(names) != cov.shape[1]:
            raise SchemaError("covariate_names length does not match covariates")
        ids = tuple(self.site_ids) or tuple(range(1, n + 1))
        if len(ids) != n:
            raise SchemaError("site_ids length does not match number of sites")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "covariates", cov)
        object.__setattr__(self, "covariate_names", names)
        object.__setattr__(self, "site_ids", ids)
        check_design(self.design)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def design(self) -> np.ndarray:
        """n x (1 + p) design matrix with leading intercept column."""
        return np.column_stack([np.ones(self.n), self.covariates])

    @property
    def proportions(self) -> np.ndarray:
        """Observed outcomes on the family's mean scale (y / m)."""
        return self.y / self.m

    def intercept_only(self) -> "Dataset":
        """Copy of this dataset with all covariates dropped."""
        return Dataset(
            coords=self.coords,
            m=self.m,
            y=self.y,
            covariates=np.empty((self.n, 0)),
            covariate_names=(),
            family_kind=self.family_kind,
            site_ids=self.site_ids,
        )


def read_dataset(path, family, covariate_columns=()) -> Dataset:
    """Load a dataset CSV, validating the schema with row/column diagnostics."""
    family = get_family(family)
    path = Path(path)
    try:
        frame = pd.read_csv(path, comment="#", encoding="utf-8")
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise SchemaError(f"{path}: cannot parse CSV: {exc}") from exc
    missing_cols = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
    if missing_cols:
        raise SchemaError(f"{path}: missing required columns {missing_cols}")
    covariate_columns = list(covariate_columns)
    absent = [c for c in covariate_columns if c not in frame.columns]
    if absent:
        raise SchemaError(f"{path}: covariate columns not found: {absent}")
    used = list(dict.fromkeys(list(REQUIRED_COLUMNS) + covariate_columns))
    sub = frame[used]
    if sub.isna().any().any():
        bad = sub.isna().any(axis=1)
        rows = (sub.index[bad] + 2).tolist()  # +2: header + 1-based lines
        cols = sub.columns[sub.isna().any(axis=0)].tolist()
        raise SchemaError(
            f"{path}: missing values in columns {cols} (file lines {rows}); "
            "records must be complete"
        )
    for col in ("x1", "x2", "m", "y"):
        if not np.issubdtype(frame[col].dtype, np.number):
            raise SchemaError(f"{path}: column {col!r} is not numeric")
    return Dataset(
        coords=frame[["x1", "x2"]].to_numpy(dtype=float),
        m=frame["m"].to_numpy(),
        y=frame["y"].to_numpy(),
        covariates=(
            frame[covariate_columns].to_numpy(dtype=float)
            if covariate_columns
            else np.empty((len(frame), 0))
        ),
        covariate_names=tuple(covariate_columns),
        family_kind=family.kind,
        site_ids=tuple(frame["id"].tolist()),
    )


def write_dataset(dataset: Dataset, path, header_comment=None) -> None:
    """Write a dataset back out in the interchange schema."""
    path = Path(path)
    cols = {
        "id": list(dataset.site_ids),
        "x1": dataset.coords[:, 0],
        "x2": dataset.coords[:, 1],
        "m": dataset.m.astype(int),
        "y": dataset.y,
    }
    frame = pd.DataFrame(cols)
    for j, name in enumerate(dataset.covariate_names):
        # Coordinates reused as covariates are already in the frame.
        if name not in frame.columns:
            frame[name] = dataset.covariates[:, j]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        frame.to_csv(fh, index=False)
