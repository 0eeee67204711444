"""Dataset invariants and the CSV interchange schema."""

import numpy as np
import pytest

from georsq.data import Dataset, read_dataset, write_dataset
from georsq.exceptions import SchemaError


def small_dataset(family="binomial"):
    coords = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    return Dataset(
        coords=coords,
        m=[10, 10, 10, 10],
        y=[2.0, 5.0, 7.0, 1.0],
        covariates=coords.copy(),
        covariate_names=("x1", "x2"),
        family_kind=family,
    )


class TestDatasetInvariants:
    def test_minimum_sites(self):
        with pytest.raises(SchemaError, match="at least 3"):
            Dataset(
                coords=[[0, 0], [1, 1]], m=[1, 1], y=[0.0, 1.0], covariates=np.empty((2, 0))
            )

    def test_duplicate_coordinates_rejected(self):
        with pytest.raises(SchemaError, match="duplicate"):
            Dataset(
                coords=[[0, 0], [0, 0], [1, 1]],
                m=[1, 1, 1],
                y=[0.0, 1.0, 0.0],
                covariates=np.empty((3, 0)),
            )

    def test_binomial_bounds(self):
        with pytest.raises(SchemaError, match="binomial outcomes"):
            Dataset(
                coords=[[0, 0], [1, 0], [0, 1]],
                m=[5, 5, 5],
                y=[2.0, 6.0, 1.0],
                covariates=np.empty((3, 0)),
                family_kind="binomial",
            )

    def test_rank_deficient_design_rejected(self):
        x = np.array([[1.0], [2.0], [3.0], [4.0]])
        with pytest.raises(SchemaError, match="rank"):
            Dataset(
                coords=[[0, 0], [1, 0], [0, 1], [1, 1]],
                m=[1, 1, 1, 1],
                y=[0.0, 1.0, 0.0, 1.0],
                covariates=np.column_stack([x, 2 * x]),
            )

    def test_proportions_and_design(self):
        data = small_dataset()
        np.testing.assert_allclose(data.proportions, data.y / 10.0)
        assert data.design.shape == (4, 3)
        np.testing.assert_array_equal(data.design[:, 0], 1.0)

    def test_intercept_only_drops_covariates(self):
        sub = small_dataset().intercept_only()
        assert sub.covariates.shape == (4, 0)
        assert sub.design.shape == (4, 1)


class TestCsvRoundTrip:
    def test_write_then_read(self, tmp_path):
        data = small_dataset()
        path = tmp_path / "d.csv"
        write_dataset(data, path, header_comment="config_hash=abc seed=1")
        back = read_dataset(path, "binomial", covariate_columns=("x1", "x2"))
        np.testing.assert_allclose(back.coords, data.coords)
        np.testing.assert_allclose(back.y, data.y)
        np.testing.assert_allclose(back.m, data.m)
        np.testing.assert_allclose(back.covariates, data.covariates)
        assert back.covariate_names == ("x1", "x2")

    def test_missing_column_diagnosed(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,x1,x2,y\n1,0,0,1\n2,1,0,0\n3,0,1,1\n")
        with pytest.raises(SchemaError, match=r"missing required columns \['m'\]"):
            read_dataset(path, "binomial")

    def test_missing_values_diagnosed_with_rows(self, tmp_path):
        path = tmp_path / "na.csv"
        path.write_text("id,x1,x2,m,y\n1,0,0,5,1\n2,1,0,5,\n3,0,1,5,2\n")
        with pytest.raises(SchemaError, match=r"\['y'\].*lines \[3\]"):
            read_dataset(path, "binomial")

    def test_unknown_covariate_column(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("id,x1,x2,m,y\n1,0,0,5,1\n2,1,0,5,0\n3,0,1,5,2\n")
        with pytest.raises(SchemaError, match="covariate columns not found"):
            read_dataset(path, "binomial", covariate_columns=("elevation",))
