"""Keyed group-by aggregation and left-join augmentation.

The 15 aggregation functions share degenerate-value rules: an empty multiset
yields 0 for COUNT and COUNT_DISTINCT and drops the group otherwise; a
single-element multiset yields 0 for VAR/STD and drops the group for the
sample-variance family and KURTOSIS. Dropped groups surface as missing keys
at join time, where a single fill policy resolves them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from featforge.engine import kernels
from featforge.table import ColumnKind, Table


class AggregationFunction(enum.IntEnum):
    SUM = 0
    MIN = 1
    MAX = 2
    COUNT = 3
    AVG = 4
    COUNT_DISTINCT = 5
    VAR = 6
    VAR_SAMPLE = 7
    STD = 8
    STD_SAMPLE = 9
    ENTROPY = 10
    KURTOSIS = 11
    MODE = 12
    MAD = 13
    MEDIAN = 14


# COUNT, COUNT_DISTINCT, ENTROPY and MODE also accept text columns; the rest
# need numbers (datetimes aggregate as epoch seconds).
ANY_KIND_FUNCTIONS = frozenset(
    {
        AggregationFunction.COUNT,
        AggregationFunction.COUNT_DISTINCT,
        AggregationFunction.ENTROPY,
        AggregationFunction.MODE,
    }
)


@dataclass(frozen=True)
class KeyedFeature:
    """One float per distinct key tuple among predicate-surviving rows."""

    key_columns: tuple[str, ...]
    key_kinds: tuple[ColumnKind, ...]
    rows: dict[tuple, float]


@dataclass(frozen=True)
class FeatureColumn:
    """A candidate feature aligned with the training table's rows."""

    name: str
    values: np.ndarray
    missing_fraction: float


def aggregate(values, fn: AggregationFunction) -> float | None:
    """Aggregate one multiset of non-null values; None means the group is dropped.

    Text multisets are only valid for the ANY_KIND functions and are encoded as
    indices into their sorted distinct values (so MODE returns a category index).
    """
    values = list(values)
    if any(isinstance(v, str) for v in values):
        if fn not in ANY_KIND_FUNCTIONS:
            raise ValueError(f"{fn.name} requires a numeric column")
        cats = sorted(set(values))
        index = {v: i for i, v in enumerate(cats)}
        arr = np.array([index[v] for v in values], dtype=np.float64)
    else:
        arr = np.asarray(values, dtype=np.float64)
    arr = np.sort(arr)
    starts = np.array([0, len(arr)], dtype=np.intp)
    out, valid = kernels.segment_aggregate(arr, starts, int(fn))
    if not valid[0] or not np.isfinite(out[0]):
        return None
    return float(out[0])


def _combined_key_codes(table: Table, keys: tuple[str, ...], rows: np.ndarray):
    """Mix per-column category codes into one int64 code per row.

    Returns (combined codes, per-row validity, per-column category arrays,
    per-column cardinalities). Rows with a Null key cell are invalid.
    """
    cats_list, cards = [], []
    combined = np.zeros(len(rows), dtype=np.int64)
    ok = np.ones(len(rows), dtype=bool)
    capacity = 1
    for key in keys:
        codes, cats = table.codes(key)
        sub = codes[rows]
        ok &= sub >= 0
        card = max(len(cats), 1)
        capacity *= card
        if capacity > 1 << 62:  # mixed code must stay within int64
            raise ValueError(f"combined cardinality of keys {keys} exceeds the supported range")
        combined = combined * card + np.where(sub >= 0, sub, 0)
        cats_list.append(cats)
        cards.append(card)
    return combined, ok, cats_list, cards


def _decode_key_tuple(code: int, cats_list, cards, kinds) -> tuple:
    parts = []
    for cats, card in zip(reversed(cats_list), reversed(cards)):
        parts.append(cats[code % card])
        code //= card
    raw = tuple(reversed(parts))
    out = []
    for v, kind in zip(raw, kinds):
        if kind is ColumnKind.TEXT:
            out.append(str(v))
        elif kind is ColumnKind.FLOAT:
            out.append(float(v))
        else:
            out.append(int(v))
    return tuple(out)


def group_aggregate(
    table: Table,
    selection: np.ndarray,
    keys: list[str] | tuple[str, ...],
    fn: AggregationFunction,
    agg_col: str,
) -> KeyedFeature:
    """Partition selected rows by key tuple and aggregate one column per group.

    Rows with Null key cells are discarded; groups whose aggregate is undefined
    are dropped from the result.
    """
    keys = tuple(keys)
    if not keys:
        raise ValueError("group keys must be non-empty")
    key_kinds = tuple(table.kind_of(k) for k in keys)
    col = table.column(agg_col)
    if col.kind is ColumnKind.TEXT and fn not in ANY_KIND_FUNCTIONS:
        raise ValueError(f"{fn.name} requires a numeric column, {agg_col!r} is text")

    selection = np.asarray(selection, dtype=np.int64)
    combined, key_ok, cats_list, cards = _combined_key_codes(table, keys, selection)
    rows = selection[key_ok]
    combined = combined[key_ok]
    if len(rows) == 0:
        return KeyedFeature(keys, key_kinds, {})

    group_codes, gids = np.unique(combined, return_inverse=True)
    n_groups = len(group_codes)

    if col.kind is ColumnKind.TEXT:
        value_codes, _ = table.codes(agg_col)
        vals = value_codes[rows].astype(np.float64)
        present = value_codes[rows] >= 0
    else:
        vals = col.data[rows].astype(np.float64)
        present = ~col.mask[rows]

    gids_p = gids[present]
    vals_p = vals[present]
    order = np.lexsort((vals_p, gids_p))
    sorted_vals = vals_p[order]
    counts = np.bincount(gids_p, minlength=n_groups)
    starts = np.zeros(n_groups + 1, dtype=np.intp)
    np.cumsum(counts, out=starts[1:])

    out, valid = kernels.segment_aggregate(sorted_vals, starts, int(fn))
    valid = valid.astype(bool) & np.isfinite(out)

    result: dict[tuple, float] = {}
    for gi in np.flatnonzero(valid):
        key_tuple = _decode_key_tuple(int(group_codes[gi]), cats_list, cards, key_kinds)
        result[key_tuple] = float(out[gi])
    return KeyedFeature(keys, key_kinds, result)


def augment(
    train: Table,
    feature: KeyedFeature,
    keys: list[str] | tuple[str, ...],
    fill: float,
    name: str,
) -> FeatureColumn:
    """Left-join a keyed feature onto the training table, preserving row order."""
    keys = tuple(keys)
    if keys != feature.key_columns:
        raise ValueError(f"join keys {keys} do not match feature keys {feature.key_columns}")
    train_kinds = tuple(train.kind_of(k) for k in keys)
    if train_kinds != feature.key_kinds:
        raise ValueError(
            f"key kind mismatch: train has {[k.value for k in train_kinds]}, "
            f"feature was built on {[k.value for k in feature.key_kinds]}"
        )

    n = train.row_count
    key_values = []
    any_null = np.zeros(n, dtype=bool)
    for key, kind in zip(keys, train_kinds):
        codes, cats = train.codes(key)
        any_null |= codes < 0
        if len(cats) == 0:  # all-null key column: every row misses
            key_values.append([0] * n)
            continue
        column_vals = cats[np.where(codes >= 0, codes, 0)]
        if kind is ColumnKind.TEXT:
            key_values.append([str(v) for v in column_vals])
        elif kind is ColumnKind.FLOAT:
            key_values.append([float(v) for v in column_vals])
        else:
            key_values.append([int(v) for v in column_vals])

    rows = feature.rows
    values = np.full(n, float(fill), dtype=np.float64)
    missing = 0
    for i, key_tuple in enumerate(zip(*key_values)) if key_values else ():
        if any_null[i]:
            missing += 1
            continue
        hit = rows.get(key_tuple)
        if hit is None:
            missing += 1
        else:
            values[i] = hit
    return FeatureColumn(name, values, missing / n if n else 0.0)
