"""Layer-wise beam search over predicate-attribute combinations.

Attribute sets grow canonically (each node only extends with attributes that
come after its largest one), so every combination is generated exactly once.
A node's worth is the best proxy score a short inner search can reach inside
its query pool; a ridge predictor trained on the one-hot encodings of already
scored nodes prunes children before the (much costlier) proxy evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from featforge.models import TaskKind
from featforge.proxies import ProxyKind, proxy_score
from featforge.query import build_space, build_template, decode, execute
from featforge.seeding import derive_seed
from featforge.table import Table
from featforge.tpe import TpeConfig, tpe_run


@dataclass
class TemplateNode:
    attrs: tuple[str, ...]
    encoding: tuple[int, ...]
    proxy_value: float | None = None
    predicted_value: float | None = None

    @property
    def depth(self) -> int:
        return len(self.attrs)


@dataclass(frozen=True)
class IdentConfig:
    beam_width: int = 1
    max_depth: int = 4
    inner_budget: int = 100
    n_out: int = 8
    predictor_on: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.beam_width < 1 or self.max_depth < 1 or self.inner_budget < 1 or self.n_out < 1:
            raise ValueError("invalid identification config")


@dataclass
class CostLedger:
    proxy_evaluations: int = 0  # tree nodes whose proxy value was computed
    predictions: int = 0
    baseline_evaluations: int = 0  # the always-scored empty-predicate template
    output_truncated: bool = False


@dataclass(frozen=True)
class TemplateIngredients:
    """The fixed parts of every generated template: functions, aggregation
    columns, and foreign keys. Only the predicate attribute set varies."""

    fns: tuple
    agg_cols: tuple[str, ...]
    keys: tuple[str, ...]


def make_node(attrs, attr_order: list[str]) -> TemplateNode:
    order = {a: i for i, a in enumerate(attr_order)}
    canon = tuple(sorted(set(attrs), key=order.__getitem__))
    encoding = tuple(1 if a in canon else 0 for a in attr_order)
    return TemplateNode(canon, encoding)


def children(node: TemplateNode, attr_order: list[str]) -> list[TemplateNode]:
    """One child per attribute strictly after the node's largest attribute."""
    order = {a: i for i, a in enumerate(attr_order)}
    start = order[node.attrs[-1]] + 1 if node.attrs else 0
    return [make_node(node.attrs + (a,), attr_order) for a in attr_order[start:]]


@dataclass(frozen=True)
class RidgePredictor:
    weights: np.ndarray
    bias: float

    def predict(self, encoding) -> float:
        return float(np.dot(self.weights, np.asarray(encoding, dtype=np.float64)) + self.bias)


def fit_predictor(records: list[tuple[tuple[int, ...], float]], ridge: float = 1.0) -> RidgePredictor:
    """Ridge regression from one-hot encodings to proxy values, with an
    unregularized intercept; refit from scratch on the cumulative record set."""
    if len(records) < 2:
        raise ValueError("need at least 2 records")
    X = np.array([r[0] for r in records], dtype=np.float64)
    y = np.array([r[1] for r in records], dtype=np.float64)
    n, d = X.shape
    A = np.zeros((d + 1, d + 1))
    A[:d, :d] = X.T @ X + ridge * np.eye(d)
    A[:d, d] = X.sum(axis=0)
    A[d, :d] = X.sum(axis=0)
    A[d, d] = n
    rhs = np.concatenate([X.T @ y, [y.sum()]])
    solution = np.linalg.solve(A, rhs)
    return RidgePredictor(solution[:d], float(solution[d]))


def node_proxy_effectiveness(
    node: TemplateNode,
    train: Table,
    labels: np.ndarray,
    relevant: Table,
    ingredients: TemplateIngredients,
    proxy: ProxyKind,
    task: TaskKind,
    inner_budget: int,
    seed: int,
    fill: float = 0.0,
    bins: int = 10,
    categorical_cap: int = 64,
    grid_resolution: int = 20,
) -> float:
    """Best proxy value reachable by a short search in the node's query pool."""
    template = build_template(
        relevant, ingredients.fns, ingredients.agg_cols, node.attrs, ingredients.keys
    )
    space = build_space(template, relevant, categorical_cap, grid_resolution)

    def objective(vector):
        feature = execute(decode(space, vector), relevant, train, fill)
        return -proxy_score(proxy, feature, labels, task, bins, seed).value

    history = tpe_run(objective, space, inner_budget, TpeConfig(seed=seed))
    return -history.best.objective


def make_node_scorer(
    train: Table,
    labels: np.ndarray,
    relevant: Table,
    ingredients: TemplateIngredients,
    proxy: ProxyKind,
    task: TaskKind,
    cfg: IdentConfig,
    fill: float = 0.0,
    bins: int = 10,
    categorical_cap: int = 64,
    grid_resolution: int = 20,
):
    """Default scorer: inner-search proxy effectiveness with a per-node seed."""

    def scorer(node: TemplateNode) -> float:
        bits = int("".join(map(str, node.encoding)), 2) if node.encoding else 0
        return node_proxy_effectiveness(
            node, train, labels, relevant, ingredients, proxy, task,
            cfg.inner_budget, derive_seed(cfg.seed, "node", bits),
            fill, bins, categorical_cap, grid_resolution,
        )

    return scorer


def identify(
    attr_order: list[str],
    cfg: IdentConfig,
    scorer,
    include_empty: bool = True,
) -> tuple[list[TemplateNode], CostLedger]:
    """Beam search for the top-n promising attribute combinations.

    Layer 1 scores every singleton. Deeper layers expand the beam's children;
    with the predictor on, only the top-beam-width predicted children get a
    real proxy evaluation. The empty combination (no predicates at all) is
    scored separately and competes for the output slots, so the output space
    always contains the predicate-free queries.
    """
    if not attr_order:
        raise ValueError("attribute list must be non-empty")
    if len(set(attr_order)) != len(attr_order):
        raise ValueError("attribute list has duplicates")
    ledger = CostLedger()
    records: list[tuple[tuple[int, ...], float]] = []
    evaluated: list[TemplateNode] = []

    def evaluate(node: TemplateNode) -> None:
        node.proxy_value = float(scorer(node))
        ledger.proxy_evaluations += 1
        records.append((node.encoding, node.proxy_value))
        evaluated.append(node)

    def by_quality(node: TemplateNode):
        return (-node.proxy_value, node.attrs)

    layer = children(make_node((), attr_order), attr_order)  # all singletons
    for node in layer:
        evaluate(node)
    beam = sorted(layer, key=by_quality)[: cfg.beam_width]
    predictor = fit_predictor(records) if len(records) >= 2 else None

    max_depth = min(cfg.max_depth, len(attr_order))
    for _ in range(2, max_depth + 1):
        kids = [child for parent in beam for child in children(parent, attr_order)]
        if not kids:
            break
        if cfg.predictor_on and predictor is not None:
            for kid in kids:
                kid.predicted_value = predictor.predict(kid.encoding)
                ledger.predictions += 1
            kids.sort(key=lambda n: (-n.predicted_value, n.attrs))
            to_eval = kids[: cfg.beam_width]
            for node in to_eval:
                evaluate(node)
            beam = to_eval
        else:
            for node in kids:
                evaluate(node)
            beam = sorted(kids, key=by_quality)[: cfg.beam_width]
        predictor = fit_predictor(records)

    candidates = list(evaluated)
    if include_empty:
        empty = make_node((), attr_order)
        empty.proxy_value = float(scorer(empty))
        ledger.baseline_evaluations += 1
        candidates.append(empty)

    candidates.sort(key=by_quality)
    if cfg.n_out > len(candidates):
        ledger.output_truncated = True
    return candidates[: cfg.n_out], ledger


def identify_templates(
    train: Table,
    labels: np.ndarray,
    relevant: Table,
    ingredients: TemplateIngredients,
    attr_order: list[str],
    cfg: IdentConfig,
    proxy: ProxyKind = ProxyKind.MI,
    task: TaskKind = TaskKind.BINARY,
    fill: float = 0.0,
    bins: int = 10,
    categorical_cap: int = 64,
    grid_resolution: int = 20,
) -> tuple[list[TemplateNode], CostLedger]:
    """identify() wired to the real proxy-search scorer."""
    scorer = make_node_scorer(
        train, labels, relevant, ingredients, proxy, task, cfg,
        fill, bins, categorical_cap, grid_resolution,
    )
    return identify(attr_order, cfg, scorer)
