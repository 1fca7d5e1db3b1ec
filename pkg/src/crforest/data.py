"""Competing-risks responses, covariate tables and CSV ingestion."""

from __future__ import annotations

import csv
import gzip
import hashlib
import io
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"
BOOLEAN = "boolean"
COLUMN_KINDS = (NUMERIC, CATEGORICAL, BOOLEAN)

MISSING_TOKENS = frozenset({"", "NA"})
_TRUE_TOKENS = frozenset({"TRUE", "True", "true", "T"})
_FALSE_TOKENS = frozenset({"FALSE", "False", "false", "F"})


class SchemaError(ValueError):
    """Input does not match the expected columns or kinds."""


class DataParseError(ValueError):
    """A cell could not be parsed."""


class ConfigurationError(ValueError):
    """Parameters are inconsistent with the data (e.g. Gray splitting without censor times)."""


@dataclass(frozen=True)
class CompetingRiskResponse:
    """Observed times, event codes and optional censor times for a set of subjects.

    ``event`` is 0 for censored subjects and ``1..J`` otherwise. ``censor_time``
    is only needed by the Gray splitting rule; when given, censored subjects
    must have ``censor_time == time``.
    """

    time: np.ndarray
    event: np.ndarray
    censor_time: np.ndarray | None = None

    def __post_init__(self):
        time = np.ascontiguousarray(self.time, dtype=np.float64).reshape(-1)
        event_raw = np.asarray(self.event).reshape(-1)
        if event_raw.dtype.kind == "f":
            if not np.all(np.isfinite(event_raw)) or np.any(event_raw != np.round(event_raw)):
                raise DataParseError("event codes must be integers")
        event = np.ascontiguousarray(event_raw, dtype=np.int64)
        if time.shape != event.shape:
            raise SchemaError("time and event must have the same length")
        if not np.all(np.isfinite(time)):
            raise DataParseError("times must be finite (missing responses are not allowed)")
        if np.any(time < 0):
            raise DataParseError("times must be nonnegative")
        if np.any(event < 0):
            raise DataParseError("event codes must be >= 0")
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "event", event)
        if self.censor_time is not None:
            c = np.ascontiguousarray(self.censor_time, dtype=np.float64).reshape(-1)
            if c.shape != time.shape:
                raise SchemaError("censor_time must have the same length as time")
            if not np.all(np.isfinite(c)) or np.any(c < 0):
                raise DataParseError("censor times must be finite and nonnegative")
            censored = event == 0
            if np.any(c[censored] != time[censored]):
                raise DataParseError("censored subjects must have censor_time equal to time")
            if np.any(c[~censored] < time[~censored]):
                warnings.warn("some subjects have censor_time < time for an observed event",
                              stacklevel=2)
            object.__setattr__(self, "censor_time", c)

    def __len__(self):
        return self.time.shape[0]

    def __getitem__(self, idx):
        c = None if self.censor_time is None else self.censor_time[idx]
        return CompetingRiskResponse(self.time[idx], self.event[idx], c)

    @property
    def n_events(self):
        """J, the largest event code present."""
        return int(self.event.max()) if len(self) else 0

    @property
    def has_censor_times(self):
        return self.censor_time is not None


def risk_set_size(response, t, weights=None):
    """Number of subjects with observed time >= t."""
    at_risk = response.time >= t
    if weights is None:
        return int(np.count_nonzero(at_risk))
    return np.asarray(weights)[at_risk].sum()


def event_count(response, t, j, weights=None):
    """Number of type-``j`` events observed exactly at time ``t``."""
    hit = (response.time == t) & (response.event == j)
    if weights is None:
        return int(np.count_nonzero(hit))
    return np.asarray(weights)[hit].sum()


@dataclass(frozen=True)
class Column:
    name: str
    kind: str = NUMERIC
    levels: tuple = ()

    def __post_init__(self):
        if self.kind not in COLUMN_KINDS:
            raise SchemaError(f"unknown column kind {self.kind!r}")

    def to_dict(self):
        return {"name": self.name, "kind": self.kind, "levels": list(self.levels)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["name"], d["kind"], tuple(d.get("levels", ())))


@dataclass(frozen=True)
class Dataset:
    """Covariate matrix plus competing-risks responses.

    ``X`` holds one float column per covariate. Categorical columns store
    dense level ids (indices into ``Column.levels``), boolean columns store
    0/1, and every kind uses NaN as the missing marker.
    """

    X: np.ndarray
    columns: tuple
    response: CompetingRiskResponse
    n_events: int = field(default=0)

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise SchemaError("X must be two-dimensional")
        if X.shape[1] != len(self.columns):
            raise SchemaError("X has %d columns but the schema names %d"
                              % (X.shape[1], len(self.columns)))
        if X.shape[0] != len(self.response):
            raise SchemaError("X and the response have different row counts")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "columns", tuple(self.columns))
        J = self.n_events or self.response.n_events
        if J < 1 or not np.any(self.response.event != 0):
            raise SchemaError("at least one subject must have an observed event")
        if self.response.n_events > J:
            raise SchemaError("event codes exceed the declared number of events")
        object.__setattr__(self, "n_events", int(J))

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def feature_names(self):
        return [c.name for c in self.columns]

    @classmethod
    def from_arrays(cls, X, time, event, censor_time=None, feature_names=None,
                    categorical=(), n_events=None):
        """Build a dataset from numeric arrays.

        Columns listed in ``categorical`` (by index or name) must already hold
        integer level codes; their level tables are the sorted distinct codes.
        """
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        p = X.shape[1]
        names = list(feature_names) if feature_names is not None else [f"x{i + 1}" for i in range(p)]
        cat = {names[c] if isinstance(c, (int, np.integer)) else c for c in categorical}
        columns = []
        X = X.copy()
        for i, name in enumerate(names):
            if name in cat:
                col = X[:, i]
                present = np.unique(col[~np.isnan(col)])
                levels = tuple(level_label(v) for v in present)
                codes = np.searchsorted(present, col)
                X[:, i] = np.where(np.isnan(col), np.nan, codes)
                columns.append(Column(name, CATEGORICAL, levels))
            else:
                columns.append(Column(name, NUMERIC))
        response = CompetingRiskResponse(time, event, censor_time)
        return cls(X, tuple(columns), response, n_events or 0)

    def subset(self, rows):
        return Dataset(self.X[rows], self.columns, self.response[rows], self.n_events)

    def content_hash(self):
        """SHA-256 of covariates and responses; identifies training data for OOB use."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.X).tobytes())
        h.update(self.response.time.tobytes())
        h.update(self.response.event.tobytes())
        if self.response.censor_time is not None:
            h.update(self.response.censor_time.tobytes())
        for c in self.columns:
            h.update(repr(c.to_dict()).encode())
        return h.hexdigest()


def level_label(v):
    """Text label of a numeric categorical code."""
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def check_event_codes(event):
    """Reject event codes that do not form the contiguous range 1..J."""
    codes = np.unique(event[event != 0])
    if codes.size == 0:
        raise SchemaError("no observed events (every subject is censored)")
    expected = np.arange(1, codes[-1] + 1)
    if codes.size != expected.size or np.any(codes != expected):
        missing = sorted(set(expected.tolist()) - set(codes.tolist()))
        raise SchemaError(f"event codes must be contiguous 1..J; missing {missing}")
    return int(codes[-1])


def _open_text(path):
    path = Path(path)
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8", newline="")
    return open(path, "r", encoding="utf-8", newline="")


def _parse_float(cell):
    try:
        return float(cell)
    except ValueError:
        return None


def infer_kind(cells):
    present = [c for c in cells if c not in MISSING_TOKENS]
    if all(_parse_float(c) is not None for c in present):
        return NUMERIC
    if all(c in _TRUE_TOKENS or c in _FALSE_TOKENS for c in present):
        return BOOLEAN
    return CATEGORICAL


def encode_column(cells, column):
    """Encode raw string cells against a column schema; unseen levels become missing."""
    out = np.full(len(cells), np.nan)
    if column.kind == NUMERIC:
        for i, c in enumerate(cells):
            if c in MISSING_TOKENS:
                continue
            v = _parse_float(c)
            if v is None:
                raise DataParseError(f"column {column.name!r}, row {i + 1}: "
                                     f"cannot parse {c!r} as a number")
            out[i] = v
    elif column.kind == BOOLEAN:
        for i, c in enumerate(cells):
            if c in _TRUE_TOKENS or c == "1":
                out[i] = 1.0
            elif c in _FALSE_TOKENS or c == "0":
                out[i] = 0.0
    else:
        lookup = {lvl: k for k, lvl in enumerate(column.levels)}
        for i, c in enumerate(cells):
            k = lookup.get(c)
            if k is not None:
                out[i] = k
    return out


def _parse_response_column(name, cells, integer=False):
    out = np.empty(len(cells), dtype=np.int64 if integer else np.float64)
    for i, c in enumerate(cells):
        if c in MISSING_TOKENS:
            raise DataParseError(f"missing value in response column {name!r} at row {i + 1}")
        v = _parse_float(c)
        if v is None or (integer and not float(v).is_integer()):
            kind = "an integer" if integer else "a number"
            raise DataParseError(f"column {name!r}, row {i + 1}: cannot parse {c!r} as {kind}")
        out[i] = v
    return out


def read_csv_columns(path):
    with _open_text(path) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file (a header row is required)") from None
        rows = [r for r in reader if r]
    for i, r in enumerate(rows):
        if len(r) != len(header):
            raise DataParseError(f"{path}: row {i + 1} has {len(r)} fields, expected {len(header)}")
    return header, [[r[k] for r in rows] for k in range(len(header))]


def load_csv(path, time="time", event="status", censor_time=None, features=None,
              schema_overrides: Mapping[str, str] | None = None, schema: Sequence[Column] | None = None):
    """Read a competing-risks dataset from a CSV file (optionally gzip-compressed).

    Parameters
    ----------
    path : str or Path
        File with a header row. ``"NA"`` and empty cells denote missing values.
    time, event, censor_time : str
        Names of the response columns. ``censor_time`` is optional.
    features : list of str, optional
        Covariate columns to keep; defaults to every non-response column.
    schema_overrides : dict, optional
        Force the kind (``numeric``, ``categorical`` or ``boolean``) of named columns.
    schema : sequence of Column, optional
        Encode covariates against an existing schema (prediction time). Levels
        not present in the schema are mapped to missing.
    """
    header, cols = read_csv_columns(path)
    index = {name: k for k, name in enumerate(header)}
    for name in (time, event) + ((censor_time,) if censor_time else ()):
        if name not in index:
            raise SchemaError(f"response column {name!r} not found in {path}")
    t = _parse_response_column(time, cols[index[time]])
    e = _parse_response_column(event, cols[index[event]], integer=True)
    c = _parse_response_column(censor_time, cols[index[censor_time]]) if censor_time else None
    response = CompetingRiskResponse(t, e, c)

    reserved = {time, event, censor_time}
    if schema is not None:
        columns = list(schema)
        for col in columns:
            if col.name not in index:
                raise SchemaError(f"covariate {col.name!r} not found in {path}")
    else:
        names = features if features is not None else [h for h in header if h not in reserved]
        overrides = dict(schema_overrides or {})
        columns = []
        for name in names:
            if name not in index:
                raise SchemaError(f"covariate {name!r} not found in {path}")
            cells = cols[index[name]]
            kind = overrides.get(name) or infer_kind(cells)
            levels = ()
            if kind == CATEGORICAL:
                levels = tuple(sorted({x for x in cells if x not in MISSING_TOKENS}))
            columns.append(Column(name, kind, levels))
    X = np.empty((len(t), len(columns)))
    for k, col in enumerate(columns):
        X[:, k] = encode_column(cols[index[col.name]], col)

    J = check_event_codes(e) if schema is None else 0
    return Dataset(X, tuple(columns), response, J)


def load_covariates(path, schema):
    """Encode only the covariates of a CSV file against ``schema`` (no response needed)."""
    header, cols = read_csv_columns(path)
    index = {name: k for k, name in enumerate(header)}
    X = np.empty((len(cols[0]) if cols else 0, len(schema)))
    for k, col in enumerate(schema):
        if col.name not in index:
            raise SchemaError(f"covariate {col.name!r} not found in {path}")
        X[:, k] = encode_column(cols[index[col.name]], col)
    return X
