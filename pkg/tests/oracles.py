"""Literal, loop-based reference implementations used only by the tests.

Nothing here imports crforest; every quantity is computed straight from
indicator sums over plain Python lists of (time, status[, censor]) tuples.
"""

import math


def event_times(rows):
    return sorted({r[0] for r in rows if r[1] != 0})


def at_risk(rows, t):
    return sum(1 for r in rows if r[0] >= t)


def deaths(rows, t, j):
    return sum(1 for r in rows if r[0] == t and r[1] == j)


def gray_at_risk(rows, t, j):
    # rows are (time, status, censor_time)
    return sum(1 for (T, d, C) in rows
               if T >= t or (T < t and d != j and C > t))


def log_rank_terms(left, right, j, risk=at_risk):
    """(numerator, variance) for one event, by literal summation.

    The variance sums over every event time, without a d_j multiplier.
    """
    both = list(left) + list(right)
    num = 0.0
    var = 0.0
    for v in event_times(both):
        if risk is at_risk:
            Y, YL = at_risk(both, v), at_risk(left, v)
        else:
            Y, YL = risk(both, v, j), risk(left, v, j)
        d, dL = deaths(both, v, j), deaths(left, v, j)
        if Y == 0:
            continue
        num += dL - d * YL / Y
        if Y > 1:
            var += (YL / Y) * (1 - YL / Y) * ((Y - d) / (Y - 1))
    return num, var


def composite(left, right, focus, gray=False):
    """Returns (value, valid)."""
    num = 0.0
    var = 0.0
    for j in focus:
        n, v = log_rank_terms(left, right, j, gray_at_risk if gray else at_risk)
        num += n
        var += v
    if var <= 0:
        return 0.0, False
    return abs(num) / math.sqrt(var), True


def kaplan_meier(rows):
    """List of (time, S(time)) at every event time."""
    s = 1.0
    out = []
    for v in event_times(rows):
        d = sum(1 for r in rows if r[0] == v and r[1] != 0)
        s *= 1 - d / at_risk(rows, v)
        out.append((v, s))
    return out


def aalen_johansen(rows, j):
    s_prev = 1.0
    f = 0.0
    out = []
    for v in event_times(rows):
        Y = at_risk(rows, v)
        f += s_prev * deaths(rows, v, j) / Y
        d = sum(1 for r in rows if r[0] == v and r[1] != 0)
        s_prev *= 1 - d / Y
        out.append((v, f))
    return out


def nelson_aalen(rows, j):
    h = 0.0
    out = []
    for v in event_times(rows):
        h += deaths(rows, v, j) / at_risk(rows, v)
        out.append((v, h))
    return out


def concordance_error(time, event, mortality, j):
    conc = 0.0
    comp = 0
    n = len(time)
    for i in range(n):
        if event[i] != j:
            continue
        for k in range(n):
            if time[i] < time[k]:
                comp += 1
                if mortality[i] > mortality[k]:
                    conc += 1.0
                elif mortality[i] == mortality[k]:
                    conc += 0.5
    if comp == 0:
        return float("nan")
    return 1.0 - conc / comp
