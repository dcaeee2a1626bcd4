from featforge.engine.aggregate import (
    ANY_KIND_FUNCTIONS,
    AggregationFunction,
    FeatureColumn,
    KeyedFeature,
    aggregate,
    augment,
    group_aggregate,
)
from featforge.engine.predicates import PredicateSpec, select_rows

__all__ = [
    "ANY_KIND_FUNCTIONS",
    "AggregationFunction",
    "FeatureColumn",
    "KeyedFeature",
    "PredicateSpec",
    "aggregate",
    "augment",
    "group_aggregate",
    "select_rows",
]
