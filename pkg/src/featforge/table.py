"""Immutable columnar tables with typed columns.

Columns are NumPy arrays plus an explicit null mask. Text cells are stored
as Python strings in an object array; datetimes as epoch seconds (int64) so
range comparisons reduce to integer comparisons.
"""

from __future__ import annotations

import calendar
import csv
import enum
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from featforge.errors import DataError


class ColumnKind(enum.Enum):
    INT = "int"
    FLOAT = "float"
    TEXT = "text"
    DATETIME = "datetime"

    @property
    def is_numeric(self) -> bool:
        return self is not ColumnKind.TEXT


_KIND_ALIASES = {
    "int": ColumnKind.INT,
    "float": ColumnKind.FLOAT,
    "text": ColumnKind.TEXT,
    "datetime": ColumnKind.DATETIME,
}


def parse_kind(name: str) -> ColumnKind:
    try:
        return _KIND_ALIASES[name.strip().lower()]
    except KeyError:
        raise DataError(f"unknown column kind {name!r}; expected one of {sorted(_KIND_ALIASES)}")


def parse_datetime(text: str) -> int:
    """ISO-8601 date or date-time string to epoch seconds (UTC, second resolution)."""
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return calendar.timegm(dt.utctimetuple())


def render_datetime(epoch: int) -> str:
    """Epoch seconds back to ISO-8601; date-only form when the time is midnight."""
    dt = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    if dt.hour == 0 and dt.minute == 0 and dt.second == 0:
        return dt.strftime("%Y-%m-%d")
    return dt.strftime("%Y-%m-%dT%H:%M:%S")


@dataclass(frozen=True)
class Column:
    name: str
    kind: ColumnKind
    data: np.ndarray  # int64 / float64 / object depending on kind
    mask: np.ndarray  # bool, True where the cell is Null

    def __post_init__(self):
        self.data.setflags(write=False)
        self.mask.setflags(write=False)

    def __len__(self) -> int:
        return len(self.data)


class Table:
    """Named, immutable collection of equally long typed columns."""

    def __init__(self, name: str, columns: list[Column]):
        names = [c.name for c in columns]
        if len(set(names)) != len(names):
            raise DataError(f"duplicate column names in table {name!r}")
        lengths = {len(c) for c in columns}
        if len(lengths) > 1:
            raise DataError(f"ragged columns in table {name!r}: lengths {sorted(lengths)}")
        self.name = name
        self._columns = tuple(columns)
        self._by_name = {c.name: c for c in columns}
        self.row_count = len(columns[0]) if columns else 0
        self._codes_cache: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        self._reads = 0

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self._columns]

    @property
    def columns(self) -> tuple[Column, ...]:
        return self._columns

    @property
    def reads(self) -> int:
        """Number of column accesses so far (hot-path instrumentation for leakage audits)."""
        return self._reads

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def column(self, name: str) -> Column:
        self._reads += 1
        try:
            return self._by_name[name]
        except KeyError:
            raise KeyError(f"table {self.name!r} has no column {name!r}") from None

    def kind_of(self, name: str) -> ColumnKind:
        return self.column(name).kind

    def cell(self, row: int, name: str):
        """Cell as a Python value; None for Null. Convenience for tests and reports."""
        col = self.column(name)
        if col.mask[row]:
            return None
        v = col.data[row]
        if col.kind is ColumnKind.INT or col.kind is ColumnKind.DATETIME:
            return int(v)
        if col.kind is ColumnKind.FLOAT:
            return float(v)
        return v

    def codes(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """Factorize a column: (codes int64 with -1 for Null, sorted distinct non-null values).

        Cached per column; tables are immutable so the cache never goes stale.
        """
        if name not in self._codes_cache:
            col = self.column(name)
            present = ~col.mask
            codes = np.full(len(col), -1, dtype=np.int64)
            if present.any():
                cats, inv = np.unique(col.data[present], return_inverse=True)
                codes[present] = inv
            else:
                cats = np.array([], dtype=col.data.dtype)
            codes.setflags(write=False)
            self._codes_cache[name] = (codes, cats)
        else:
            self._reads += 1
        return self._codes_cache[name]

    def take(self, rows: np.ndarray) -> Table:
        """New table holding the given rows, in the given order."""
        cols = [
            Column(c.name, c.kind, c.data[rows].copy(), c.mask[rows].copy())
            for c in self._columns
        ]
        return Table(self.name, cols)


def table_from_columns(name: str, spec: dict[str, tuple[ColumnKind | str, list]]) -> Table:
    """Build a table from {column: (kind, values)}; None entries become Null.

    Datetime values may be ISO strings or epoch seconds.
    """
    columns = []
    for col_name, (kind, values) in spec.items():
        kind = kind if isinstance(kind, ColumnKind) else parse_kind(kind)
        mask = np.array([v is None for v in values], dtype=bool)
        cleaned = []
        for v in values:
            if v is None:
                cleaned.append(_null_placeholder(kind))
            elif kind is ColumnKind.DATETIME and isinstance(v, str):
                cleaned.append(parse_datetime(v))
            else:
                cleaned.append(v)
        columns.append(Column(col_name, kind, _to_array(cleaned, kind), mask))
    return Table(name, columns)


def _empty_builders(schema: list[tuple[str, ColumnKind]]):
    return [([], []) for _ in schema]


def load_csv(path: str | Path, schema: dict[str, str | ColumnKind], name: str | None = None) -> Table:
    """Load an RFC-4180 CSV with a header row into a typed Table.

    `schema` maps every header column to a kind; empty-string cells become Null.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    kinds = {col: (k if isinstance(k, ColumnKind) else parse_kind(k)) for col, k in schema.items()}

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        missing = [h for h in header if h not in kinds]
        extra = sorted(set(kinds) - set(header))
        if missing or extra:
            raise DataError(
                f"{path}: header/schema mismatch (header columns without a kind: {missing}; "
                f"schema columns not in header: {extra})"
            )
        ordered = [(h, kinds[h]) for h in header]
        builders = _empty_builders(ordered)
        n_rows = 0
        for row_idx, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise DataError(f"{path}: row {row_idx} has {len(row)} cells, expected {len(header)}")
            n_rows += 1
            for (col_name, kind), (values, nulls), raw in zip(ordered, builders, row):
                if raw == "":
                    nulls.append(True)
                    values.append(_null_placeholder(kind))
                    continue
                nulls.append(False)
                try:
                    values.append(_parse_cell(raw, kind))
                except (ValueError, OverflowError):
                    raise DataError(
                        f"{path}: cannot parse {raw!r} as {kind.value} "
                        f"(row {row_idx}, column {col_name!r})"
                    ) from None

    columns = []
    for (col_name, kind), (values, nulls) in zip(ordered, builders):
        columns.append(Column(col_name, kind, _to_array(values, kind), np.array(nulls, dtype=bool)))
    return Table(name or path.stem, columns)


def _null_placeholder(kind: ColumnKind):
    return "" if kind is ColumnKind.TEXT else 0


def _parse_cell(raw: str, kind: ColumnKind):
    if kind is ColumnKind.INT:
        return int(raw)
    if kind is ColumnKind.FLOAT:
        return float(raw)
    if kind is ColumnKind.DATETIME:
        return parse_datetime(raw)
    return raw


def _to_array(values: list, kind: ColumnKind) -> np.ndarray:
    if kind is ColumnKind.TEXT:
        return np.array(values, dtype=object)
    if kind is ColumnKind.FLOAT:
        return np.array(values, dtype=np.float64)
    return np.array(values, dtype=np.int64)


def render_cell(col: Column, row: int) -> str:
    if col.mask[row]:
        return ""
    if col.kind is ColumnKind.TEXT:
        return col.data[row]
    if col.kind is ColumnKind.DATETIME:
        return render_datetime(col.data[row])
    if col.kind is ColumnKind.FLOAT:
        return repr(float(col.data[row]))
    return str(int(col.data[row]))


def write_csv(table: Table, path: str | Path) -> None:
    """Render a table back to CSV; re-loading yields a cell-for-cell identical table."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.column_names)
        cols = table.columns
        for i in range(table.row_count):
            writer.writerow([render_cell(c, i) for c in cols])


def split(table: Table, ratios: tuple[float, float, float], seed: int) -> tuple[Table, Table, Table]:
    """Deterministic shuffled three-way split; floor sizes, remainder to the first part."""
    if abs(sum(ratios) - 1.0) > 1e-9 or any(r < 0 for r in ratios):
        raise ValueError(f"split ratios must be non-negative and sum to 1, got {ratios}")
    n = table.row_count
    sizes = [int(np.floor(r * n)) for r in ratios]
    sizes[0] += n - sum(sizes)
    perm = np.random.default_rng(seed).permutation(n)
    parts = []
    start = 0
    for size in sizes:
        parts.append(table.take(perm[start : start + size]))
        start += size
    return parts[0], parts[1], parts[2]


@dataclass(frozen=True)
class Domain:
    """Finite predicate-value domain of one column."""

    column: str
    kind: str  # "categorical" | "numeric_grid" | "datetime_grid"
    values: tuple = field(default_factory=tuple)


def nearest_rank_quantile(sorted_values: np.ndarray, q: float):
    """Nearest-rank quantile: always an observed value, no interpolation."""
    n = len(sorted_values)
    if q <= 0.0:
        return sorted_values[0]
    idx = min(n - 1, int(np.ceil(q * n)) - 1)
    return sorted_values[idx]


def value_domain(table: Table, column: str, categorical_cap: int = 64, grid_resolution: int = 20) -> Domain:
    """Predicate-value domain: distinct values (capped by frequency) for text, a
    nearest-rank quantile grid for numeric and datetime columns."""
    col = table.column(column)
    present = ~col.mask
    values = col.data[present]
    if col.kind is ColumnKind.TEXT:
        cats, counts = np.unique(values, return_counts=True)
        if len(cats) > categorical_cap:
            # most frequent first, ties broken by ascending value
            ranked = sorted(range(len(cats)), key=lambda i: (-counts[i], cats[i]))
            cats = sorted(cats[i] for i in ranked[:categorical_cap])
        return Domain(column, "categorical", tuple(str(v) for v in cats))
    kind = "datetime_grid" if col.kind is ColumnKind.DATETIME else "numeric_grid"
    if len(values) == 0:
        return Domain(column, kind, ())
    ordered = np.sort(values)
    qs = np.linspace(0.0, 1.0, grid_resolution) if grid_resolution > 1 else np.array([0.0])
    points = [nearest_rank_quantile(ordered, q) for q in qs]
    caster = float if col.kind is ColumnKind.FLOAT else int
    deduped = sorted({caster(p) for p in points})
    return Domain(column, kind, tuple(deduped))
