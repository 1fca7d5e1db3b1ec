"""Kaplan-Meier, Aalen-Johansen and Nelson-Aalen estimators for a node."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .stepfunction import StepFunction, bundle_from_arrays


@dataclass(frozen=True)
class NodeSummary:
    """Risk-set tallies at the distinct observed event times of a node.

    Attributes
    ----------
    event_times : ndarray, shape (K,)
        Increasing distinct times at which some event (of any type) occurred.
    at_risk : ndarray, shape (K,)
        Number of subjects with observed time >= each event time.
    events : ndarray, shape (J, K)
        ``events[j-1, k]`` is the number of type-j events at ``event_times[k]``.
    """

    event_times: np.ndarray
    at_risk: np.ndarray
    events: np.ndarray

    @property
    def n_times(self):
        return self.event_times.size


def summarize(response, n_events=None, weights=None):
    """Tally at-risk counts and per-type event counts.

    ``weights`` are per-row multiplicities (bootstrap counts); a row with
    weight 2 counts exactly like two identical rows.
    """
    J = int(n_events) if n_events is not None else response.n_events
    return summarize_arrays(response.time, response.event, J, weights)


def summarize_arrays(time, event, n_events, weights=None):
    J = int(n_events)
    w = np.ones(time.size) if weights is None else np.asarray(weights, dtype=np.float64)
    observed = (event != 0) & (w > 0)
    v = np.unique(time[observed])
    K = v.size
    # rows at risk at v[k] for k < pos
    pos = np.searchsorted(v, time, side="right")
    at_risk = np.cumsum(np.bincount(pos, weights=w, minlength=K + 1)[::-1])[::-1][1:]
    events = np.zeros((J, K))
    if K:
        k_idx = np.searchsorted(v, time[observed])
        np.add.at(events, (event[observed] - 1, k_idx), w[observed])
    return NodeSummary(v, at_risk, events)


def _survival_values(s):
    if s.n_times == 0:
        return np.empty(0)
    return np.cumprod(1.0 - s.events.sum(axis=0) / s.at_risk)


def kaplan_meier(s):
    """Overall survival; drops at each event time (right-continuous)."""
    return StepFunction(s.event_times, _survival_values(s), 1.0)


def _cif_values(s, surv):
    if s.n_times == 0:
        return np.empty((s.events.shape[0], 0))
    before = np.concatenate(([1.0], surv[:-1]))
    return np.cumsum(before * s.events / s.at_risk, axis=1)


def aalen_johansen(s, j):
    """Cumulative incidence of event ``j``."""
    cif = _cif_values(s, _survival_values(s))
    return StepFunction(s.event_times, cif[j - 1] if cif.size else np.empty(0), 0.0)


def nelson_aalen(s, j):
    """Cause-specific cumulative hazard of event ``j``."""
    if s.n_times == 0:
        return StepFunction.constant(0.0)
    return StepFunction(s.event_times, np.cumsum(s.events[j - 1] / s.at_risk), 0.0)


def node_arrays(s):
    """Shared-jump-time arrays ``(times, survival, cif, chf)`` for a node."""
    surv = _survival_values(s)
    cif = _cif_values(s, surv)
    if s.n_times:
        chf = np.cumsum(s.events / s.at_risk, axis=1)
    else:
        chf = np.empty_like(cif)
    return s.event_times, surv, cif, chf


def terminal_node_functions(response, n_events=None, weights=None):
    """Survival, CIF and CHF bundle for the rows of a terminal node."""
    return bundle_from_arrays(*node_arrays(summarize(response, n_events, weights)))
