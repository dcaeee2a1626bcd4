"""Conjunctive row predicates: equality on text columns, ranges elsewhere."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from featforge.table import ColumnKind, Table


@dataclass(frozen=True)
class PredicateSpec:
    """One conjunct. Equality carries `value`; a range carries one or both bounds.

    Datetime bounds are epoch seconds, matching the table representation.
    """

    column: str
    value: str | None = None
    lower: float | int | None = None
    upper: float | int | None = None

    @property
    def is_equality(self) -> bool:
        return self.value is not None

    def __post_init__(self):
        if self.value is not None and (self.lower is not None or self.upper is not None):
            raise ValueError(f"predicate on {self.column!r} mixes equality and range forms")
        if self.value is None and self.lower is None and self.upper is None:
            raise ValueError(f"predicate on {self.column!r} has no condition; omit it instead")


def select_rows(table: Table, predicates: list[PredicateSpec]) -> np.ndarray:
    """Indices of rows satisfying every predicate; Null cells fail any predicate."""
    mask = np.ones(table.row_count, dtype=bool)
    for pred in predicates:
        col = table.column(pred.column)
        if pred.is_equality:
            if col.kind is not ColumnKind.TEXT:
                raise ValueError(
                    f"equality predicate on {pred.column!r} requires a text column, got {col.kind.value}"
                )
            mask &= ~col.mask & (col.data == pred.value)
        else:
            if col.kind is ColumnKind.TEXT:
                raise ValueError(f"range predicate on text column {pred.column!r}")
            if pred.lower is not None and pred.upper is not None and pred.lower > pred.upper:
                raise ValueError(
                    f"range on {pred.column!r} has lower {pred.lower} > upper {pred.upper}"
                )
            ok = ~col.mask
            if pred.lower is not None:
                ok &= col.data >= pred.lower
            if pred.upper is not None:
                ok &= col.data <= pred.upper
            mask &= ok
    return np.flatnonzero(mask)
