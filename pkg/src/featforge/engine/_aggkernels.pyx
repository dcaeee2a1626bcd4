# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled segment aggregation kernels.

Same contract as the NumPy fallback: values sorted ascending within each
segment, starts holds G+1 boundaries, returns (results, validity bytes).
"""

import numpy as np

from libc.math cimport log, sqrt

BACKEND_NAME = "cython"

DEF F_SUM = 0
DEF F_MIN = 1
DEF F_MAX = 2
DEF F_COUNT = 3
DEF F_AVG = 4
DEF F_COUNT_DISTINCT = 5
DEF F_VAR = 6
DEF F_VAR_SAMPLE = 7
DEF F_STD = 8
DEF F_STD_SAMPLE = 9
DEF F_ENTROPY = 10
DEF F_KURTOSIS = 11
DEF F_MODE = 12
DEF F_MAD = 13
DEF F_MEDIAN = 14


cdef double _seg_sum(const double[::1] xs, Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(lo, hi):
        acc += xs[i]
    return acc


cdef double _seg_moment_ratio(const double[::1] xs, Py_ssize_t lo, Py_ssize_t hi, int* ok) noexcept nogil:
    # excess kurtosis from population moments: m4 / m2^2 - 3
    cdef Py_ssize_t n = hi - lo, i
    cdef double mean = _seg_sum(xs, lo, hi) / n
    cdef double d, d2, m2 = 0.0, m4 = 0.0
    for i in range(lo, hi):
        d = xs[i] - mean
        d2 = d * d
        m2 += d2
        m4 += d2 * d2
    m2 /= n
    m4 /= n
    if m2 <= 0.0:
        ok[0] = 0
        return 0.0
    ok[0] = 1
    return m4 / (m2 * m2) - 3.0


cdef double _seg_var(const double[::1] xs, Py_ssize_t lo, Py_ssize_t hi, int sample) noexcept nogil:
    cdef Py_ssize_t n = hi - lo, i
    cdef double mean = _seg_sum(xs, lo, hi) / n
    cdef double d, acc = 0.0
    for i in range(lo, hi):
        d = xs[i] - mean
        acc += d * d
    if sample:
        return acc / (n - 1)
    return acc / n


cdef double _seg_median(const double[::1] xs, Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    cdef Py_ssize_t n = hi - lo
    cdef Py_ssize_t mid = lo + n // 2
    if n & 1:
        return xs[mid]
    return 0.5 * (xs[mid - 1] + xs[mid])


cdef double _kth_absdev(const double[::1] xs, Py_ssize_t lo, Py_ssize_t hi,
                        double med, Py_ssize_t k) noexcept nogil:
    # k-th smallest (0-based) of |xs[i] - med|. Because xs is sorted, the
    # deviations form two ascending runs (leftwards below the median,
    # rightwards above); merge them instead of sorting.
    cdef Py_ssize_t split = lo
    while split < hi and xs[split] < med:
        split += 1
    cdef Py_ssize_t li = split - 1
    cdef Py_ssize_t ri = split
    cdef Py_ssize_t taken = 0
    cdef double lv, rv, cur = 0.0
    while taken <= k:
        if li >= lo and ri < hi:
            lv = med - xs[li]
            rv = xs[ri] - med
            if lv <= rv:
                cur = lv
                li -= 1
            else:
                cur = rv
                ri += 1
        elif li >= lo:
            cur = med - xs[li]
            li -= 1
        else:
            cur = xs[ri] - med
            ri += 1
        taken += 1
    return cur


cdef double _seg_mad(const double[::1] xs, Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    cdef Py_ssize_t n = hi - lo
    cdef double med = _seg_median(xs, lo, hi)
    if n & 1:
        return _kth_absdev(xs, lo, hi, med, n // 2)
    return 0.5 * (_kth_absdev(xs, lo, hi, med, n // 2 - 1)
                  + _kth_absdev(xs, lo, hi, med, n // 2))


cdef double _seg_entropy(const double[::1] xs, Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    cdef Py_ssize_t n = hi - lo
    cdef double acc = 0.0  # sum of c * ln(c) over runs
    cdef Py_ssize_t i = lo, j
    cdef double c
    while i < hi:
        j = i + 1
        while j < hi and xs[j] == xs[i]:
            j += 1
        c = <double>(j - i)
        acc += c * log(c)
        i = j
    return log(<double>n) - acc / n


cdef double _seg_mode(const double[::1] xs, Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    # first longest run in the sorted segment = most frequent, smallest-value tie rule
    cdef double best = xs[lo]
    cdef Py_ssize_t best_len = 0
    cdef Py_ssize_t i = lo, j
    while i < hi:
        j = i + 1
        while j < hi and xs[j] == xs[i]:
            j += 1
        if j - i > best_len:
            best = xs[i]
            best_len = j - i
        i = j
    return best


cdef double _seg_count_distinct(const double[::1] xs, Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    cdef Py_ssize_t count = 1, i
    for i in range(lo + 1, hi):
        if xs[i] != xs[i - 1]:
            count += 1
    return <double>count


def segment_aggregate(const double[::1] values, const Py_ssize_t[::1] starts, int fn_id):
    cdef Py_ssize_t n_groups = starts.shape[0] - 1
    out_arr = np.zeros(n_groups, dtype=np.float64)
    valid_arr = np.zeros(n_groups, dtype=np.uint8)
    cdef double[::1] out = out_arr
    cdef unsigned char[::1] valid = valid_arr
    cdef Py_ssize_t gi, lo, hi, n
    cdef int ok
    with nogil:
        for gi in range(n_groups):
            lo = starts[gi]
            hi = starts[gi + 1]
            n = hi - lo
            if n == 0:
                if fn_id == F_COUNT or fn_id == F_COUNT_DISTINCT:
                    out[gi] = 0.0
                    valid[gi] = 1
                continue
            if fn_id == F_SUM:
                out[gi] = _seg_sum(values, lo, hi)
            elif fn_id == F_MIN:
                out[gi] = values[lo]
            elif fn_id == F_MAX:
                out[gi] = values[hi - 1]
            elif fn_id == F_COUNT:
                out[gi] = <double>n
            elif fn_id == F_AVG:
                out[gi] = _seg_sum(values, lo, hi) / n
            elif fn_id == F_COUNT_DISTINCT:
                out[gi] = _seg_count_distinct(values, lo, hi)
            elif fn_id == F_VAR:
                out[gi] = 0.0 if n == 1 else _seg_var(values, lo, hi, 0)
            elif fn_id == F_VAR_SAMPLE:
                if n < 2:
                    continue
                out[gi] = _seg_var(values, lo, hi, 1)
            elif fn_id == F_STD:
                out[gi] = 0.0 if n == 1 else sqrt(_seg_var(values, lo, hi, 0))
            elif fn_id == F_STD_SAMPLE:
                if n < 2:
                    continue
                out[gi] = sqrt(_seg_var(values, lo, hi, 1))
            elif fn_id == F_ENTROPY:
                out[gi] = _seg_entropy(values, lo, hi)
            elif fn_id == F_KURTOSIS:
                if n < 2:
                    continue
                out[gi] = _seg_moment_ratio(values, lo, hi, &ok)
                if not ok:
                    continue
            elif fn_id == F_MODE:
                out[gi] = _seg_mode(values, lo, hi)
            elif fn_id == F_MAD:
                out[gi] = _seg_mad(values, lo, hi)
            elif fn_id == F_MEDIAN:
                out[gi] = _seg_median(values, lo, hi)
            valid[gi] = 1
    return out_arr, valid_arr
