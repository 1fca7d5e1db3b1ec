import gzip

import numpy as np
import pytest

from crforest.data import (CATEGORICAL, NUMERIC, CompetingRiskResponse, DataParseError, Dataset,
                           SchemaError, event_count, load_covariates, load_csv, risk_set_size)


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_basic(tmp_path):
    ds = load_csv(write(tmp_path, "time,status,x1\n1,1,0.5\n2,0,1.5\n3,2,2.5\n"))
    assert ds.n == 3 and ds.n_events == 2
    assert ds.columns[0].kind == NUMERIC
    np.testing.assert_array_equal(ds.response.event, [1, 0, 2])


def test_categorical_levels(tmp_path):
    ds = load_csv(write(tmp_path, "time,status,x2\n1,1,a\n2,1,b\n3,0,a\n"))
    col = ds.columns[0]
    assert col.kind == CATEGORICAL and col.levels == ("a", "b")
    np.testing.assert_array_equal(ds.X[:, 0], [0, 1, 0])


def test_missing_covariate_cell(tmp_path):
    ds = load_csv(write(tmp_path, "time,status,x1,x2\n1,1,,a\n2,1,3,NA\n"))
    assert np.isnan(ds.X[0, 0])
    assert np.isnan(ds.X[1, 1])
    assert ds.columns[1].levels == ("a",)


def test_gzip_input(tmp_path):
    p = tmp_path / "d.csv.gz"
    with gzip.open(p, "wt") as fh:
        fh.write("time,status,x1\n1,1,0\n2,1,1\n")
    assert load_csv(p).n == 2


def test_missing_response_column(tmp_path):
    with pytest.raises(SchemaError):
        load_csv(write(tmp_path, "t,status,x1\n1,1,0\n"))


def test_non_numeric_time_names_row(tmp_path):
    with pytest.raises(DataParseError, match="row 2"):
        load_csv(write(tmp_path, "time,status,x1\n1,1,0\nabc,1,0\n"))


def test_missing_response_value(tmp_path):
    with pytest.raises(DataParseError):
        load_csv(write(tmp_path, "time,status,x1\n1,NA,0\n2,1,0\n"))


def test_noncontiguous_event_codes(tmp_path):
    with pytest.raises(SchemaError):
        load_csv(write(tmp_path, "time,status,x1\n1,1,0\n2,3,0\n"))


def test_schema_encoding_maps_unseen_levels_to_missing(tmp_path):
    train = load_csv(write(tmp_path, "time,status,g\n1,1,a\n2,1,b\n"))
    X = load_covariates(write(tmp_path, "g\nb\nc\n", "new.csv"), train.columns)
    assert X[0, 0] == 1 and np.isnan(X[1, 0])


def test_censor_time_rules():
    with pytest.raises(DataParseError):
        CompetingRiskResponse([1.0, 2.0], [0, 1], [1.5, 3.0])
    with pytest.warns(UserWarning):
        CompetingRiskResponse([1.0, 2.0], [0, 1], [1.0, 1.5])


def test_risk_set_and_event_count():
    r = CompetingRiskResponse([1, 2, 3], [1, 1, 1])
    assert risk_set_size(r, 2) == 2
    assert risk_set_size(r, 0) == 3
    assert risk_set_size(CompetingRiskResponse([1, 1, 5], [1, 1, 1]), 1) == 3
    r = CompetingRiskResponse([1, 1, 2], [1, 2, 1])
    assert event_count(r, 1, 1) == 1
    assert event_count(r, 1, 2) == 1
    assert event_count(r, 3, 1) == 0


def test_content_hash_tracks_data():
    a = Dataset.from_arrays(np.arange(4.0), [1, 2, 3, 4], [1, 0, 1, 2])
    b = Dataset.from_arrays(np.arange(4.0), [1, 2, 3, 4], [1, 0, 1, 2])
    c = Dataset.from_arrays(np.arange(4.0), [1, 2, 3, 5], [1, 0, 1, 2])
    assert a.content_hash() == b.content_hash() != c.content_hash()


def test_all_censored_dataset_rejected():
    with pytest.raises(SchemaError):
        Dataset.from_arrays(np.arange(3.0), [1, 2, 3], [0, 0, 0])
