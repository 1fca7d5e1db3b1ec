"""Split scoring with the composite log-rank and Gray statistics, and split search.

For one event type ``j`` the two-sample statistic compares type-``j``
events on the left with their expectation under a common hazard; the
composite statistic sums numerators over the events of focus and divides
by the root of the summed variances. The Gray variant keeps subjects that
failed from another cause in the risk set until their censor time.

The search sorts node rows by the tried covariate and adds them to the
left side one at a time. Numerators and the linear part of the variance
are prefix sums; the quadratic part uses two Fenwick trees over risk-set
positions, so evaluating every threshold of a column costs O(n log K).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .data import CATEGORICAL, ConfigurationError

LOGRANK = "logrank"
GRAY = "gray"

# a candidate only replaces the incumbent if it is better by this relative margin,
# so exact ties go to the first candidate seen regardless of rounding
_TIE_MARGIN = 1e-12
# variances below this fraction of their linear part are rounding noise
_VAR_RTOL = 1e-9


@dataclass(frozen=True)
class SplitFinderSpec:
    """Which statistic to use and which events it should favour."""

    kind: str = LOGRANK
    events: tuple = (1,)
    events_of_focus: tuple = (1,)

    def __post_init__(self):
        kind = self.kind.lower().replace("-", "").replace("_", "")
        if kind not in (LOGRANK, GRAY):
            raise ConfigurationError(f"unknown split finder {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        events = tuple(int(e) for e in self.events)
        focus = tuple(int(e) for e in self.events_of_focus)
        if not focus:
            raise ConfigurationError("events_of_focus must not be empty")
        if not set(focus) <= set(events):
            raise ConfigurationError("events_of_focus must be a subset of events")
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "events_of_focus", focus)

    @classmethod
    def for_events(cls, kind, n_events, focus=None):
        events = tuple(range(1, n_events + 1))
        return cls(kind, events, tuple(focus) if focus else events)

    def to_dict(self):
        return {"kind": self.kind, "events": list(self.events),
                "events_of_focus": list(self.events_of_focus)}


@dataclass(frozen=True)
class SplitScore:
    value: float
    valid: bool

    @classmethod
    def invalid(cls):
        return cls(0.0, False)


@dataclass
class SplitCandidate:
    """A chosen partition of a node.

    Numeric rules send ``x <= threshold`` left; categorical rules send
    levels in ``levels`` left. Row arrays hold dataset row ids; rows
    missing the split covariate are listed in ``missing_rows`` and are
    not part of either side until the trainer assigns them.
    """

    column: int
    threshold: float | None
    levels: np.ndarray | None
    left_rows: np.ndarray
    right_rows: np.ndarray
    missing_rows: np.ndarray
    score: SplitScore
    left_fraction: float = field(default=0.5)

    @property
    def is_categorical(self):
        return self.levels is not None

    def goes_left(self, x):
        if self.levels is not None:
            return np.isin(x, self.levels)
        return x <= self.threshold


# ---------------------------------------------------------------------------
# direct (per-partition) statistics


def _risk_positions(event_times, time, event, censor_time, j, gray):
    """Number of leading event times at which each row is in the risk set."""
    pos = np.searchsorted(event_times, time, side="right")
    if gray:
        # prior other-cause events stay at risk while uncensored (censor_time > t)
        uncensored = np.searchsorted(event_times, censor_time, side="left")
        pos = np.where(event != j, np.maximum(pos, uncensored), pos)
    return pos


def _count_by_position(pos, w, K):
    return np.cumsum(np.bincount(pos, weights=w, minlength=K + 1)[::-1])[::-1][1:]


def _direct_terms(time, event, censor_time, w, left, focus, gray):
    """Per-event (numerator, variance) for one partition, computed from scratch."""
    v = np.unique(time[(event != 0) & (w > 0)])
    K = v.size
    nums = np.zeros(len(focus))
    variances = np.zeros(len(focus))
    if K == 0:
        return nums, variances
    k_of_row = np.searchsorted(v, time)
    wl = w * left
    for idx, j in enumerate(focus):
        pos = _risk_positions(v, time, event, censor_time, j, gray)
        Y = _count_by_position(pos, w, K)
        YL = _count_by_position(pos, wl, K)
        hit = event == j
        d = np.bincount(k_of_row[hit], weights=w[hit], minlength=K)
        dL = np.bincount(k_of_row[hit], weights=wl[hit], minlength=K)
        frac = YL / Y
        nums[idx] = np.sum(dL - d * frac)
        with np.errstate(divide="ignore", invalid="ignore"):
            factor = np.where(Y > 1, (Y - d) / (Y - 1), 0.0)
        variances[idx] = np.sum(frac * (1.0 - frac) * factor)
    return nums, variances


def _combine(left, right, left_weights, right_weights, need_censor):
    time = np.concatenate([left.time, right.time])
    event = np.concatenate([left.event, right.event])
    if need_censor:
        if left.censor_time is None or right.censor_time is None:
            raise ConfigurationError(
                "the Gray split finder requires censor times for every subject")
        censor = np.concatenate([left.censor_time, right.censor_time])
    else:
        censor = None
    wl = np.ones(len(left)) if left_weights is None else np.asarray(left_weights, float)
    wr = np.ones(len(right)) if right_weights is None else np.asarray(right_weights, float)
    w = np.concatenate([wl, wr])
    is_left = np.concatenate([np.ones(len(left)), np.zeros(len(right))])
    return time, event, censor, w, is_left


def log_rank_score_single(left, right, j, left_weights=None, right_weights=None):
    """Numerator and variance of the two-sample log-rank statistic for event ``j``.

    The standardized statistic is ``numerator / sqrt(variance)``. Event times
    with a single subject at risk contribute nothing to the variance.
    """
    time, event, censor, w, is_left = _combine(left, right, left_weights, right_weights, False)
    nums, variances = _direct_terms(time, event, censor, w, is_left, (j,), False)
    return float(nums[0]), float(variances[0])


def _composite(nums, variances):
    total_var = variances.sum()
    if not total_var > 0:
        return SplitScore.invalid()
    return SplitScore(float(abs(nums.sum()) / np.sqrt(total_var)), True)


def composite_log_rank(left, right, focus, left_weights=None, right_weights=None):
    """Composite log-rank split score over the events in ``focus``."""
    time, event, censor, w, is_left = _combine(left, right, left_weights, right_weights, False)
    return _composite(*_direct_terms(time, event, censor, w, is_left, tuple(focus), False))


def composite_gray(left, right, focus, left_weights=None, right_weights=None):
    """Composite score with the cause-specific (Gray) risk sets in place of Y(t)."""
    time, event, censor, w, is_left = _combine(left, right, left_weights, right_weights, True)
    return _composite(*_direct_terms(time, event, censor, w, is_left, tuple(focus), True))


def gray_risk_set(response, t, j, weights=None):
    """Subjects at risk of event ``j`` at ``t`` in the Gray sense."""
    if response.censor_time is None:
        raise ConfigurationError("the Gray split finder requires censor times for every subject")
    time, event, c = response.time, response.event, response.censor_time
    at_risk = (time >= t) | ((time < t) & (event != j) & (c > t))
    if weights is None:
        return int(np.count_nonzero(at_risk))
    return np.asarray(weights)[at_risk].sum()


def score_partition(response, left_mask, spec, weights=None):
    """Score an arbitrary boolean partition of ``response`` under ``spec``."""
    gray = spec.kind == GRAY
    if gray and response.censor_time is None:
        raise ConfigurationError("the Gray split finder requires censor times for every subject")
    w = np.ones(len(response)) if weights is None else np.asarray(weights, dtype=np.float64)
    left = np.asarray(left_mask, dtype=np.float64)
    if not (np.any(w * left > 0) and np.any(w * (1 - left) > 0)):
        return SplitScore.invalid()
    return _composite(*_direct_terms(response.time, response.event, response.censor_time,
                                     w, left, spec.events_of_focus, gray))


# ---------------------------------------------------------------------------
# sweep kernel


@njit(cache=True, nogil=True)
def _sweep(order, xs, w, posm, isev, Hm, Am, Bm, cand):
    """Best threshold boundary among ``cand`` for rows added in ``order``.

    Returns (score, m): the left side is ``order[:m + 1]``; m = -1 if no
    candidate has positive variance.
    """
    F = posm.shape[0]
    K = Hm.shape[1] - 1
    n = order.shape[0]
    num = np.zeros(F)
    lin = np.zeros(F)
    quad = np.zeros(F)
    # Fenwick trees over positions 0..K (1-based storage)
    fb = np.zeros((F, K + 2))
    fc = np.zeros((F, K + 2))
    csum = 0.0
    best = -1.0
    best_m = -1
    for m in range(n):
        i = order[m]
        c = w[i]
        for f in range(F):
            p = posm[f, i]
            # prefix sums over positions <= p
            s1 = 0.0
            s2 = 0.0
            q = p + 1
            while q > 0:
                s1 += fb[f, q]
                s2 += fc[f, q]
                q -= q & (-q)
            bp = Bm[f, p]
            s = s1 + bp * (csum - s2)
            quad[f] += 2.0 * c * s + c * c * bp
            lin[f] += c * Am[f, p]
            num[f] += c * (isev[f, i] - Hm[f, p])
            q = p + 1
            val = c * bp
            while q <= K + 1:
                fb[f, q] += val
                fc[f, q] += c
                q += q & (-q)
        csum += c
        if m + 1 < n and cand[m] and xs[m] < xs[m + 1]:
            tn = 0.0
            tv = 0.0
            tl = 0.0
            for f in range(F):
                tn += num[f]
                tv += lin[f] - quad[f]
                tl += lin[f]
            if tv > _VAR_RTOL * tl and tv > 0.0:
                score = abs(tn) / np.sqrt(tv)
                if best_m < 0 or score > best * (1.0 + _TIE_MARGIN):
                    best = score
                    best_m = m
    return best, best_m


class _NodeStats:
    """Prefix-sum tables shared by every candidate split of a node's rows."""

    __slots__ = ("posm", "isev", "Hm", "Am", "Bm", "K")

    def __init__(self, time, event, censor_time, w, focus, gray):
        v = np.unique(time[(event != 0) & (w > 0)])
        K = v.size
        F = len(focus)
        n = time.size
        self.K = K
        self.posm = np.empty((F, n), dtype=np.int64)
        self.isev = np.empty((F, n))
        self.Hm = np.zeros((F, K + 1))
        self.Am = np.zeros((F, K + 1))
        self.Bm = np.zeros((F, K + 1))
        if K == 0:
            self.posm[:] = 0
            self.isev[:] = 0.0
            return
        k_of_row = np.searchsorted(v, time)
        for idx, j in enumerate(focus):
            pos = _risk_positions(v, time, event, censor_time, j, gray)
            Y = _count_by_position(pos, w, K)
            hit = event == j
            d = np.bincount(k_of_row[hit], weights=w[hit], minlength=K)
            with np.errstate(divide="ignore", invalid="ignore"):
                factor = np.where(Y > 1, (Y - d) / (Y - 1), 0.0)
            self.posm[idx] = pos
            self.isev[idx] = hit
            np.cumsum(d / Y, out=self.Hm[idx, 1:])
            np.cumsum(factor / Y, out=self.Am[idx, 1:])
            np.cumsum(factor / (Y * Y), out=self.Bm[idx, 1:])

    def sweep(self, order, xs, w, cand):
        return _sweep(order, xs, w, self.posm, self.isev, self.Hm, self.Am, self.Bm, cand)


def _random_level_subset(rng, n_levels):
    while True:
        mask = rng.random(n_levels) < 0.5
        k = int(mask.sum())
        if 0 < k < n_levels:
            return mask


def find_best_split(node_rows, dataset, spec, mtry, number_of_splits, rng, counts=None):
    """Search ``mtry`` random covariates for the best-scoring split of a node.

    Parameters
    ----------
    node_rows : ndarray of int
        Dataset row ids in the node (distinct).
    counts : ndarray, optional
        Bootstrap multiplicity of each node row.
    number_of_splits : int
        0 tries every achievable split; otherwise this many random candidates
        per covariate.

    Returns
    -------
    SplitCandidate or None
    """
    node_rows = np.asarray(node_rows, dtype=np.int64)
    w_all = np.ones(node_rows.size) if counts is None else np.asarray(counts, dtype=np.float64)
    resp = dataset.response
    gray = spec.kind == GRAY
    if gray and resp.censor_time is None:
        raise ConfigurationError("the Gray split finder requires censor times for every subject")
    focus = spec.events_of_focus
    time_all = resp.time[node_rows]
    event_all = resp.event[node_rows]
    censor_all = resp.censor_time[node_rows] if gray else None

    p = dataset.X.shape[1]
    columns = rng.choice(p, size=min(mtry, p), replace=False)
    full_stats = None
    best = None  # (score, column, rule, left_local_mask over present rows, present idx)
    for col in columns:
        x_all = dataset.X[node_rows, col]
        present = np.flatnonzero(~np.isnan(x_all))
        if present.size < 2:
            continue
        x = x_all[present]
        if present.size == node_rows.size:
            if full_stats is None:
                full_stats = _NodeStats(time_all, event_all, censor_all, w_all, focus, gray)
            stats, w = full_stats, w_all
        else:
            w = w_all[present]
            stats = _NodeStats(time_all[present], event_all[present],
                               None if censor_all is None else censor_all[present],
                               w, focus, gray)
        if stats.K == 0:
            continue
        if dataset.columns[col].kind == CATEGORICAL:
            found = _search_categorical(x, w, stats, number_of_splits, rng)
        else:
            found = _search_numeric(x, w, stats, number_of_splits, rng)
        if found is None:
            continue
        score, rule, left_mask = found
        if best is None or score > best[0] * (1.0 + _TIE_MARGIN):
            best = (score, int(col), rule, left_mask, present)
    if best is None:
        return None

    _, col, rule, left_mask, present = best
    missing = np.setdiff1d(np.arange(node_rows.size), present, assume_unique=True)
    left_local = present[left_mask]
    right_local = present[~left_mask]
    # exact score of the chosen partition (the sweep accumulates rounding)
    rows = node_rows[present]
    exact = _composite(*_direct_terms(
        resp.time[rows], resp.event[rows], None if censor_all is None else censor_all[present],
        w_all[present], left_mask.astype(np.float64), focus, gray))
    if not exact.valid:
        return None
    wl = w_all[left_local].sum()
    wr = w_all[right_local].sum()
    is_cat = dataset.columns[col].kind == CATEGORICAL
    return SplitCandidate(
        column=col,
        threshold=None if is_cat else float(rule),
        levels=np.asarray(rule, dtype=np.float64) if is_cat else None,
        left_rows=node_rows[left_local],
        right_rows=node_rows[right_local],
        missing_rows=node_rows[missing],
        score=exact,
        left_fraction=float(wl / (wl + wr)),
    )


def _search_numeric(x, w, stats, number_of_splits, rng):
    order = np.argsort(x, kind="stable")
    xs = x[order]
    if xs[0] == xs[-1]:
        return None
    if number_of_splits == 0:
        cand = np.ones(xs.size, dtype=np.bool_)
    else:
        thresholds = x[rng.integers(0, x.size, size=number_of_splits)]
        cand = np.isin(xs, thresholds)
    score, m = stats.sweep(order, xs, w, cand)
    if m < 0:
        return None
    threshold = xs[m]
    return score, threshold, x <= threshold


def _search_categorical(x, w, stats, number_of_splits, rng):
    levels = np.unique(x)
    if levels.size < 2:
        return None
    if number_of_splits == 0:
        subsets = [levels[k:k + 1] for k in range(levels.size)]
    else:
        subsets = [levels[_random_level_subset(rng, levels.size)] for _ in range(number_of_splits)]
    best = None
    for subset in subsets:
        left = np.isin(x, subset)
        order = np.concatenate([np.flatnonzero(left), np.flatnonzero(~left)])
        xs = np.concatenate([np.zeros(left.sum()), np.ones((~left).sum())])
        cand = np.zeros(x.size, dtype=np.bool_)
        cand[left.sum() - 1] = True
        score, m = stats.sweep(order, xs, w, cand)
        if m < 0:
            continue
        if best is None or score > best[0] * (1.0 + _TIE_MARGIN):
            best = (score, np.sort(subset), left)
    return best
