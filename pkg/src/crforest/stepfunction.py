"""Right-continuous step functions and the curve bundle returned by the forest."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class StepFunction:
    """Piecewise-constant, right-continuous function of time.

    ``values[k]`` holds on ``[times[k], times[k+1])`` and ``initial_value``
    holds before ``times[0]``.
    """

    __slots__ = ("times", "values", "initial_value")

    def __init__(self, times, values, initial_value=0.0):
        times = np.ascontiguousarray(times, dtype=np.float64).reshape(-1)
        values = np.ascontiguousarray(values, dtype=np.float64).reshape(-1)
        if times.shape != values.shape:
            raise ValueError("times and values must have equal length")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("jump times must be strictly increasing")
        self.times = times
        self.values = values
        self.initial_value = float(initial_value)

    @classmethod
    def constant(cls, value):
        return cls(np.empty(0), np.empty(0), value)

    def __call__(self, t):
        return evaluate(self, t)

    def __repr__(self):
        return "StepFunction(n_jumps=%d, initial_value=%g)" % (self.times.size, self.initial_value)

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        return (self.initial_value == other.initial_value
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.values, other.values))

    def integrate(self, a, b):
        return integrate(self, a, b)

    def to_text(self):
        """Two-column ``time<TAB>value`` text with a leading row for t = 0."""
        lines = ["time\tvalue"]
        if self.times.size == 0 or self.times[0] > 0:
            lines.append("0\t%r" % self.initial_value)
        lines.extend("%r\t%r" % (float(t), float(v)) for t, v in zip(self.times, self.values))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, initial_value=None):
        rows = [ln.split("\t") for ln in text.strip().splitlines()[1:]]
        t = np.array([float(r[0]) for r in rows])
        v = np.array([float(r[1]) for r in rows])
        if initial_value is None:
            initial_value = v[0] if t.size and t[0] == 0 else 0.0
        if t.size and t[0] == 0 and v[0] == initial_value:
            t, v = t[1:], v[1:]
        return cls(t, v, initial_value)


def evaluate(f, t):
    """Value of ``f`` at ``t`` (scalar or array)."""
    t_arr = np.asarray(t, dtype=np.float64)
    idx = np.searchsorted(f.times, t_arr, side="right") - 1
    if f.values.size == 0:
        out = np.full(t_arr.shape, f.initial_value)
    else:
        out = np.where(idx >= 0, f.values[np.maximum(idx, 0)], f.initial_value)
    return float(out) if out.ndim == 0 else out


def average(fs):
    """Pointwise arithmetic mean of step functions.

    The result jumps at the sorted union of the input jump times.
    """
    fs = list(fs)
    if not fs:
        raise ValueError("cannot average an empty list of step functions")
    grid = np.unique(np.concatenate([f.times for f in fs]))
    total = np.zeros(grid.size)
    init = 0.0
    for f in fs:
        total += evaluate(f, grid) if grid.size else 0.0
        init += f.initial_value
    m = len(fs)
    return StepFunction(grid, total / m, init / m)


def _pieces(breaks, a, b):
    inner = breaks[(breaks > a) & (breaks < b)]
    edges = np.concatenate(([a], inner, [b]))
    return edges[:-1], np.diff(edges)


def integrate(f, a, b):
    """Exact integral of ``f`` over ``[a, b]``."""
    if a > b:
        raise ValueError("integration bounds must satisfy a <= b")
    if a == b:
        return 0.0
    left, width = _pieces(f.times, a, b)
    return float(np.dot(evaluate(f, left), width))


def integrated_squared_difference(f, g, a, b):
    """Exact integral of ``(f - g)**2`` over ``[a, b]``."""
    if a > b:
        raise ValueError("integration bounds must satisfy a <= b")
    if a == b:
        return 0.0
    left, width = _pieces(np.union1d(f.times, g.times), a, b)
    diff = np.asarray(evaluate(f, left)) - np.asarray(evaluate(g, left))
    return float(np.dot(diff * diff, width))


@dataclass
class CompetingRiskFunctions:
    """Survival curve plus one CIF and one cumulative hazard per event type."""

    survival: StepFunction
    cifs: list
    chfs: list

    @property
    def n_events(self):
        return len(self.cifs)

    def cif(self, j):
        return self.cifs[j - 1]

    def chf(self, j):
        return self.chfs[j - 1]


def bundle_from_arrays(times, survival, cif, chf):
    """Wrap the shared-jump-time arrays of a node into a curve bundle."""
    return CompetingRiskFunctions(
        StepFunction(times, survival, 1.0),
        [StepFunction(times, row, 0.0) for row in cif],
        [StepFunction(times, row, 0.0) for row in chf],
    )


def average_bundles(times_list, surv_list, cif_list, chf_list):
    """Mean of several curve bundles given as shared-jump-time arrays.

    Each bundle contributes its jump increments; sorting all increments by
    time (a stable merge) and accumulating gives the exact pointwise mean
    on the union of jump times.
    """
    m = len(times_list)
    J = cif_list[0].shape[0]
    times = np.concatenate(times_list)
    if times.size == 0:
        empty = np.empty(0)
        return bundle_from_arrays(empty, empty, np.empty((J, 0)), np.empty((J, 0)))
    incs = np.empty((1 + 2 * J, times.size))
    start = 0
    for t, s, c, h in zip(times_list, surv_list, cif_list, chf_list):
        k = t.size
        if k:
            stop = start + k
            incs[0, start:stop] = np.diff(s, prepend=1.0)
            incs[1:1 + J, start:stop] = np.diff(c, axis=1, prepend=0.0)
            incs[1 + J:, start:stop] = np.diff(h, axis=1, prepend=0.0)
            start = stop
    order = np.argsort(times, kind="stable")
    times = times[order]
    acc = np.cumsum(incs[:, order], axis=1) / m
    last = np.flatnonzero(np.append(times[1:] != times[:-1], True))
    grid = times[last]
    acc = acc[:, last]
    return bundle_from_arrays(grid, 1.0 + acc[0], acc[1:1 + J], acc[1 + J:])
