"""Coercion of user inputs into responses and covariate matrices."""

from __future__ import annotations

import numpy as np

from .data import (BOOLEAN, CATEGORICAL, NUMERIC, Column, CompetingRiskResponse, Dataset,
                   SchemaError, encode_column, level_label)


def check_response(y, censor_time=None):
    """Coerce ``y`` to a :class:`CompetingRiskResponse`.

    Accepts a response object, a structured array with ``time`` and
    ``event`` (and optionally ``censor_time``) fields, a mapping with those
    keys, or an array/sequence whose columns (or items) are time, event and
    optionally censor time.
    """
    if isinstance(y, CompetingRiskResponse):
        if censor_time is not None:
            return CompetingRiskResponse(y.time, y.event, censor_time)
        return y
    if isinstance(y, dict) or (hasattr(y, "dtype") and y.dtype.names):
        names = y.keys() if isinstance(y, dict) else y.dtype.names
        c = censor_time
        if c is None and "censor_time" in names:
            c = y["censor_time"]
        return CompetingRiskResponse(y["time"], y["event"], c)
    if isinstance(y, tuple):
        return CompetingRiskResponse(y[0], y[1], y[2] if len(y) > 2 else censor_time)
    arr = np.asarray(y, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] not in (2, 3):
        raise SchemaError("y must have two (time, event) or three (time, event, censor_time) columns")
    c = arr[:, 2] if arr.shape[1] == 3 else censor_time
    return CompetingRiskResponse(arr[:, 0], arr[:, 1], c)


def _is_frame(X):
    return hasattr(X, "dtypes") and hasattr(X, "columns")


def _frame_schema(X):
    columns = []
    for name in X.columns:
        col = X[name]
        kind = col.dtype.kind
        if kind == "b":
            columns.append(Column(str(name), BOOLEAN))
        elif kind in "iuf":
            columns.append(Column(str(name), NUMERIC))
        else:
            levels = sorted({str(v) for v in col.dropna()})
            columns.append(Column(str(name), CATEGORICAL, tuple(levels)))
    return tuple(columns)


def _encode_frame(X, columns):
    out = np.empty((len(X), len(columns)))
    for k, c in enumerate(columns):
        if c.name not in X.columns:
            raise SchemaError(f"covariate {c.name!r} missing from input")
        col = X[c.name]
        if c.kind == CATEGORICAL:
            cells = ["" if v is None or v != v else str(v) for v in col.tolist()]
            out[:, k] = encode_column(cells, c)
        else:
            out[:, k] = np.asarray(col, dtype=np.float64)
    return out


def check_covariates(X, columns=None, categorical_features=()):
    """Return ``(X, columns)`` with ``X`` a float matrix using NaN for missing.

    When ``columns`` is given (prediction time) the input is encoded against
    it and categorical levels unseen during training become missing.
    """
    if isinstance(X, Dataset):
        if columns is not None and len(X.columns) != len(columns):
            raise SchemaError("dataset columns do not match the fitted schema")
        return X.X, X.columns
    if _is_frame(X):
        schema = tuple(columns) if columns is not None else _frame_schema(X)
        return _encode_frame(X, schema), schema
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise SchemaError("X must be two-dimensional")
    if columns is not None:
        if arr.shape[1] != len(columns):
            raise SchemaError(f"expected {len(columns)} covariate columns, got {arr.shape[1]}")
        arr = arr.copy()
        for k, c in enumerate(columns):
            if c.kind == CATEGORICAL:
                # raw codes map through the level table built at fit time
                cells = ["" if np.isnan(v) else level_label(v) for v in arr[:, k]]
                arr[:, k] = encode_column(cells, c)
        return arr, tuple(columns)
    ds = Dataset.from_arrays(arr, np.zeros(arr.shape[0]), np.ones(arr.shape[0]),
                             categorical=categorical_features)
    return ds.X, ds.columns
