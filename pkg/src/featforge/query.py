"""Query templates, the mixed search space over candidate queries, and the
vector codec that lets the optimizer treat queries as fixed-layout points.

Space layout: one dimension for the aggregation function, one for the
aggregation column, then per predicate column either one optional-value
dimension (text column) or a lower/upper pair over the column's quantile
grid (numeric or datetime), then one binary dimension per foreign key.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from featforge.engine import AggregationFunction, FeatureColumn, PredicateSpec
from featforge.engine.aggregate import augment, group_aggregate
from featforge.engine.predicates import select_rows
from featforge.table import ColumnKind, Table, render_datetime, value_domain


@dataclass(frozen=True)
class QueryTemplate:
    fns: tuple[AggregationFunction, ...]
    agg_cols: tuple[str, ...]
    pred_cols: tuple[str, ...]
    pred_kinds: tuple[ColumnKind, ...]
    keys: tuple[str, ...]

    def __post_init__(self):
        if not self.fns or not self.agg_cols or not self.keys:
            raise ValueError("template needs at least one function, aggregation column and key")
        if len(set(self.pred_cols)) != len(self.pred_cols):
            raise ValueError(f"duplicate predicate columns: {self.pred_cols}")


def build_template(
    relevant: Table,
    fns,
    agg_cols,
    pred_cols,
    keys,
) -> QueryTemplate:
    """Validate the quadruple against the relevant table and canonicalize the
    predicate columns into the table's column order."""
    for col in [*agg_cols, *pred_cols, *keys]:
        if col not in relevant:
            raise KeyError(f"template column {col!r} missing from table {relevant.name!r}")
    order = {name: i for i, name in enumerate(relevant.column_names)}
    canon = tuple(sorted(dict.fromkeys(pred_cols), key=order.__getitem__))
    return QueryTemplate(
        fns=tuple(AggregationFunction[f] if isinstance(f, str) else AggregationFunction(f) for f in fns),
        agg_cols=tuple(agg_cols),
        pred_cols=canon,
        pred_kinds=tuple(relevant.kind_of(c) for c in canon),
        keys=tuple(keys),
    )


# dimension roles
FN = "fn"
AGG = "agg"
EQUALS = "eq"
LOWER = "lo"
UPPER = "hi"
KEY = "key"


@dataclass(frozen=True)
class Dim:
    role: str
    column: str | None
    choices: tuple
    _index: dict = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(self.choices)})

    def __len__(self) -> int:
        return len(self.choices)

    def index_of(self, value) -> int:
        try:
            return self._index[value]
        except KeyError:
            raise ValueError(f"value {value!r} outside the domain of dim {self.role}/{self.column}") from None


@dataclass(frozen=True)
class SearchSpace:
    template: QueryTemplate
    dims: tuple[Dim, ...]

    def __len__(self) -> int:
        return len(self.dims)


@dataclass(frozen=True)
class CandidateQuery:
    template: QueryTemplate
    fn: AggregationFunction
    agg_col: str
    predicates: tuple[PredicateSpec, ...]
    keys: tuple[str, ...]


def build_space(
    template: QueryTemplate,
    relevant: Table,
    categorical_cap: int = 64,
    grid_resolution: int = 20,
) -> SearchSpace:
    """Derive the finite per-dimension domains for a template."""
    dims = [
        Dim(FN, None, tuple(range(len(template.fns)))),
        Dim(AGG, None, tuple(range(len(template.agg_cols)))),
    ]
    for col, kind in zip(template.pred_cols, template.pred_kinds):
        domain = value_domain(relevant, col, categorical_cap, grid_resolution)
        if kind is ColumnKind.TEXT:
            dims.append(Dim(EQUALS, col, (None, *domain.values)))
        else:
            dims.append(Dim(LOWER, col, (None, *domain.values)))
            dims.append(Dim(UPPER, col, (None, *domain.values)))
    for key in template.keys:
        dims.append(Dim(KEY, key, (0, 1)))
    return SearchSpace(template, tuple(dims))


def check_vector(space: SearchSpace, vector: tuple) -> None:
    if len(vector) != len(space.dims):
        raise ValueError(f"vector has {len(vector)} slots, space has {len(space.dims)} dims")
    for dim, slot in zip(space.dims, vector):
        dim.index_of(slot)


def repair(space: SearchSpace, vector: tuple) -> tuple:
    """Swap out-of-order range bounds and force at least one key bit on."""
    slots = list(vector)
    i = 0
    while i < len(space.dims):
        dim = space.dims[i]
        if dim.role == LOWER:
            lo, hi = slots[i], slots[i + 1]
            if lo is not None and hi is not None and lo > hi:
                slots[i], slots[i + 1] = hi, lo
            i += 2
            continue
        i += 1
    key_idx = [i for i, d in enumerate(space.dims) if d.role == KEY]
    if all(slots[i] == 0 for i in key_idx):
        slots[key_idx[0]] = 1
    return tuple(slots)


def decode(space: SearchSpace, vector: tuple) -> CandidateQuery:
    """Vector to executable query; total on conforming vectors thanks to repair."""
    check_vector(space, vector)
    vector = repair(space, vector)
    template = space.template
    fn = template.fns[vector[0]]
    agg_col = template.agg_cols[vector[1]]
    predicates = []
    keys = []
    i = 2
    while i < len(space.dims):
        dim = space.dims[i]
        if dim.role == EQUALS:
            if vector[i] is not None:
                predicates.append(PredicateSpec(dim.column, value=vector[i]))
            i += 1
        elif dim.role == LOWER:
            lo, hi = vector[i], vector[i + 1]
            if lo is not None or hi is not None:
                predicates.append(PredicateSpec(dim.column, lower=lo, upper=hi))
            i += 2
        else:  # KEY
            if vector[i] == 1:
                keys.append(dim.column)
            i += 1
    return CandidateQuery(template, fn, agg_col, tuple(predicates), tuple(keys))


def encode(query: CandidateQuery, space: SearchSpace) -> tuple:
    """Exact inverse of decode on repaired queries."""
    template = space.template
    slots: list = []
    slots.append(template.fns.index(query.fn))
    slots.append(template.agg_cols.index(query.agg_col))
    by_col = {p.column: p for p in query.predicates}
    unknown = set(by_col) - set(template.pred_cols)
    if unknown:
        raise ValueError(f"query predicates on columns outside the template: {sorted(unknown)}")
    for dim in space.dims[2:]:
        pred = by_col.get(dim.column)
        if dim.role == EQUALS:
            if pred is not None and not pred.is_equality:
                raise ValueError(f"range predicate on text column {dim.column!r}")
            slots.append(pred.value if pred else None)
        elif dim.role == LOWER:
            if pred is not None and pred.is_equality:
                raise ValueError(f"equality predicate on non-text column {dim.column!r}")
            slots.append(pred.lower if pred else None)
        elif dim.role == UPPER:
            slots.append(pred.upper if pred else None)
        else:
            slots.append(1 if dim.column in query.keys else 0)
    vector = tuple(slots)
    check_vector(space, vector)
    return vector


def _render_value(value, kind: ColumnKind) -> str:
    if kind is ColumnKind.TEXT:
        escaped = str(value).replace("'", "''")
        return f"'{escaped}'"
    if kind is ColumnKind.DATETIME:
        return f"'{render_datetime(int(value))}'"
    if kind is ColumnKind.FLOAT:
        return repr(float(value))
    return str(int(value))


def render_sql(query: CandidateQuery, relevant_name: str) -> str:
    """Deterministic SQL text; predicate order follows the template's canonical order."""
    kind_of = dict(zip(query.template.pred_cols, query.template.pred_kinds))
    key_list = ", ".join(query.keys)
    parts = [f"SELECT {key_list}, {query.fn.name}({query.agg_col}) AS feature FROM {relevant_name}"]
    conjuncts = []
    for pred in query.predicates:
        kind = kind_of[pred.column]
        if pred.is_equality:
            conjuncts.append(f"{pred.column} = {_render_value(pred.value, kind)}")
        else:
            if pred.lower is not None:
                conjuncts.append(f"{pred.column} >= {_render_value(pred.lower, kind)}")
            if pred.upper is not None:
                conjuncts.append(f"{pred.column} <= {_render_value(pred.upper, kind)}")
    if conjuncts:
        parts.append("WHERE " + " AND ".join(conjuncts))
    parts.append(f"GROUP BY {key_list}")
    return " ".join(parts)


def feature_name(sql: str) -> str:
    return "q_" + hashlib.sha1(sql.encode("utf-8")).hexdigest()[:12]


def execute(query: CandidateQuery, relevant: Table, train: Table, fill: float = 0.0) -> FeatureColumn:
    """Run the query against the relevant table and left-join onto the training rows."""
    selection = select_rows(relevant, list(query.predicates))
    keyed = group_aggregate(relevant, selection, query.keys, query.fn, query.agg_col)
    sql = render_sql(query, relevant.name)
    return augment(train, keyed, query.keys, fill, feature_name(sql))


def execute_many(
    query: CandidateQuery, relevant: Table, targets: list[Table], fill: float = 0.0
) -> list[FeatureColumn]:
    """Like execute, but filters and groups once and joins onto several tables."""
    selection = select_rows(relevant, list(query.predicates))
    keyed = group_aggregate(relevant, selection, query.keys, query.fn, query.agg_col)
    name = feature_name(render_sql(query, relevant.name))
    return [augment(t, keyed, query.keys, fill, name) for t in targets]
