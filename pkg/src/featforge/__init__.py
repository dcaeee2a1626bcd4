"""featforge: search for predicate-aware aggregation queries that augment a
training table with features drawn from a one-to-many relevant table."""

from featforge.engine import AggregationFunction, FeatureColumn, PredicateSpec
from featforge.query import CandidateQuery, QueryTemplate, SearchSpace
from featforge.table import ColumnKind, Domain, Table, load_csv, split, value_domain

__version__ = "0.1.0"

__all__ = [
    "AggregationFunction",
    "CandidateQuery",
    "ColumnKind",
    "Domain",
    "FeatureColumn",
    "PredicateSpec",
    "QueryTemplate",
    "SearchSpace",
    "Table",
    "load_csv",
    "split",
    "value_domain",
    "__version__",
]
