"""Mortality summaries, naive concordance, tuning score and CIF error."""

from __future__ import annotations

import warnings

import numpy as np
from numba import njit

from .stepfunction import StepFunction, evaluate, integrate, integrated_squared_difference

DEFAULT_CIF_TAU = 20.0


def extract_mortality(functions, j, tau):
    """Integral of the event-``j`` CIF over ``[0, tau]``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    return integrate(functions.cif(j), 0.0, tau)


def largest_event_time(response):
    """Default mortality horizon: the largest uncensored observed time."""
    return float(response.time[response.event != 0].max())


@njit(cache=True)
def _concordance_counts(time, is_case, score):
    # rows sorted by decreasing time; Fenwick tree over score ranks of later rows
    n = time.size
    order = np.argsort(-time, kind="mergesort")
    ranks_sorted = np.unique(score)
    rank = np.searchsorted(ranks_sorted, score)
    R = ranks_sorted.size
    tree = np.zeros(R + 1)
    concordant = 0.0
    ties = 0.0
    comparable = 0.0
    inserted = 0.0
    i = 0
    while i < n:
        # group of equal times: query against strictly later rows only
        g = i
        while g < n and time[order[g]] == time[order[i]]:
            g += 1
        for q in range(i, g):
            r = order[q]
            if not is_case[r]:
                continue
            below = 0.0
            k = rank[r]
            while k > 0:
                below += tree[k]
                k -= k & (-k)
            upto = 0.0
            k = rank[r] + 1
            while k > 0:
                upto += tree[k]
                k -= k & (-k)
            concordant += below
            ties += upto - below
            comparable += inserted
        for q in range(i, g):
            k = rank[order[q]] + 1
            while k <= R:
                tree[k] += 1.0
                k += k & (-k)
            inserted += 1.0
        i = g
    return concordant, ties, comparable


def naive_concordance(time, event, mortalities):
    """Per-event concordance error of predicted mortality.

    For event ``j`` a pair ``(i, k)`` is comparable when subject ``i`` had
    event ``j`` and ``time[i] < time[k]`` (``k`` may have any status).
    It is concordant when ``i`` has the larger event-``j`` mortality and
    counts one half when the mortalities are equal. The error is one minus
    the concordant share; events with no comparable pair give NaN.

    Parameters
    ----------
    mortalities : sequence of arrays
        ``mortalities[j-1]`` holds the predicted event-``j`` mortality per subject.
    """
    time = np.asarray(time, dtype=np.float64)
    event = np.asarray(event)
    out = np.empty(len(mortalities))
    for idx, m in enumerate(mortalities):
        m = np.asarray(m, dtype=np.float64)
        if m.shape != time.shape:
            raise ValueError("each mortality vector must align with the responses")
        conc, ties, comp = _concordance_counts(time, event == idx + 1, m)
        out[idx] = np.nan if comp == 0 else 1.0 - (conc + 0.5 * ties) / comp
    return out


def standardized_tuning_error(concordances):
    """Joint tuning score per parameter combination (lower is better).

    ``concordances[i, j]`` is the concordance index of combination ``i``
    for event ``j``. Each event column is centred and scaled across
    combinations (sample standard deviation), then the negated mean over
    events is returned. A column with zero spread contributes 0.
    """
    C = np.asarray(concordances, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] < 2:
        raise ValueError("need a 2-D array with at least two parameter combinations")
    centred = C - C.mean(axis=0)
    sd = C.std(axis=0, ddof=1)
    flat = ~(sd > 0)
    if flat.any():
        warnings.warn("events %s have zero spread across combinations"
                      % (np.flatnonzero(flat) + 1).tolist(), RuntimeWarning, stacklevel=2)
    z = np.divide(centred, sd, out=np.zeros_like(C), where=~flat)
    return -z.mean(axis=1)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


def _squared_error(truth, pred, tau):
    if isinstance(truth, StepFunction):
        return integrated_squared_difference(truth, pred, 0.0, tau)
    # smooth truth: Gauss-Legendre on each interval where the prediction is constant
    breaks = np.union1d(pred.times, getattr(truth, "breakpoints", np.empty(0)))
    breaks = breaks[(breaks > 0) & (breaks < tau)]
    edges = np.concatenate(([0.0], breaks, [tau]))
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    t = (a + b)[:, None] * 0.5 + half[:, None] * _GL_NODES[None, :]
    diff = np.asarray(truth(t)) - evaluate(pred, t)
    return float(np.sum(half * ((diff * diff) @ _GL_WEIGHTS)))


def cif_error(true_cifs, predicted_cifs, tau=DEFAULT_CIF_TAU):
    """Root integrated squared CIF error.

    Parameters
    ----------
    true_cifs, predicted_cifs : sequence over events of sequences over rows
        ``true_cifs[j-1][i]`` is a StepFunction or any callable curve (with an
        optional ``breakpoints`` attribute marking kinks); ``predicted_cifs``
        holds StepFunctions.

    Returns
    -------
    per_row : ndarray, shape (n, J)
    per_event : ndarray, shape (J,)
    overall : float
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    if len(true_cifs) != len(predicted_cifs):
        raise ValueError("truth and predictions cover different numbers of events")
    J = len(true_cifs)
    n = len(true_cifs[0]) if J else 0
    per_row = np.empty((n, J))
    for j in range(J):
        if len(true_cifs[j]) != n or len(predicted_cifs[j]) != n:
            raise ValueError("truth and predictions have different numbers of rows")
        for i in range(n):
            per_row[i, j] = np.sqrt(_squared_error(true_cifs[j][i], predicted_cifs[j][i], tau))
    per_event = per_row.mean(axis=0)
    return per_row, per_event, float(per_event.mean())
