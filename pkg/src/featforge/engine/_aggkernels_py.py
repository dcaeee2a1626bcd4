"""Pure-NumPy segment aggregation, used when the compiled extension is unavailable.

Contract shared with the compiled backend: `values` holds all groups' cells
concatenated and sorted ascending *within* each segment; `starts` has G+1
boundaries. Returns per-group results plus a validity byte (0 = the group's
aggregate is undefined and the group must be dropped).
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def _sum(seg):
    return float(seg.sum()), 1


def _minimum(seg):
    return float(seg[0]), 1


def _maximum(seg):
    return float(seg[-1]), 1


def _count(seg):
    return float(len(seg)), 1


def _avg(seg):
    return float(seg.mean()), 1


def _count_distinct(seg):
    if len(seg) == 0:
        return 0.0, 1
    return float(1 + int(np.count_nonzero(np.diff(seg)))), 1


def _var(seg):
    if len(seg) == 1:
        return 0.0, 1
    d = seg - seg.mean()
    return float((d * d).mean()), 1


def _var_sample(seg):
    n = len(seg)
    if n < 2:
        return 0.0, 0
    d = seg - seg.mean()
    return float((d * d).sum() / (n - 1)), 1


def _std(seg):
    v, ok = _var(seg)
    return float(np.sqrt(v)), ok


def _std_sample(seg):
    v, ok = _var_sample(seg)
    return (float(np.sqrt(v)), 1) if ok else (0.0, 0)


def _entropy(seg):
    _, counts = np.unique(seg, return_counts=True)
    p = counts / len(seg)
    return float(-(p * np.log(p)).sum()), 1


def _kurtosis(seg):
    n = len(seg)
    if n < 2:
        return 0.0, 0
    d = seg - seg.mean()
    m2 = (d * d).mean()
    if m2 <= 0.0:
        return 0.0, 0
    m4 = (d**4).mean()
    return float(m4 / (m2 * m2) - 3.0), 1


def _mode(seg):
    # seg is sorted: the most frequent value is the longest run; the first
    # longest run is the smallest value, which is the tie rule.
    best, best_len = seg[0], 0
    run_start = 0
    for i in range(1, len(seg) + 1):
        if i == len(seg) or seg[i] != seg[run_start]:
            if i - run_start > best_len:
                best, best_len = seg[run_start], i - run_start
            run_start = i
    return float(best), 1


def _median(seg):
    n = len(seg)
    mid = n // 2
    if n % 2:
        return float(seg[mid]), 1
    return float(0.5 * (seg[mid - 1] + seg[mid])), 1


def _mad(seg):
    m, _ = _median(seg)
    return float(np.median(np.abs(seg - m))), 1


_DISPATCH = {
    0: _sum,
    1: _minimum,
    2: _maximum,
    3: _count,
    4: _avg,
    5: _count_distinct,
    6: _var,
    7: _var_sample,
    8: _std,
    9: _std_sample,
    10: _entropy,
    11: _kurtosis,
    12: _mode,
    13: _mad,
    14: _median,
}

_EMPTY_OK = {3, 5}  # COUNT and COUNT_DISTINCT of an empty multiset are 0


def segment_aggregate(values: np.ndarray, starts: np.ndarray, fn_id: int):
    fn = _DISPATCH[fn_id]
    n_groups = len(starts) - 1
    out = np.zeros(n_groups, dtype=np.float64)
    valid = np.zeros(n_groups, dtype=np.uint8)
    for gi in range(n_groups):
        seg = values[starts[gi] : starts[gi + 1]]
        if len(seg) == 0:
            if fn_id in _EMPTY_OK:
                out[gi], valid[gi] = 0.0, 1
            continue
        out[gi], valid[gi] = fn(seg)
    return out, valid
