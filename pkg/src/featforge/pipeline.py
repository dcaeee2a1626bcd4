"""End-to-end workflow: load tables, identify promising templates, search each
template's query pool, augment the training table, and evaluate held-out lift.

The test split is materialized at split time but never read until the final
evaluation stage; the report carries an instrumented read count to prove it.
"""

from __future__ import annotations

import json
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from featforge.engine import AggregationFunction
from featforge.engine.aggregate import FeatureColumn
from featforge.errors import ConfigError, DataError, StageError
from featforge.models import (
    WORST_LOSS,
    ModelSpec,
    TaskKind,
    fit,
    loss,
    query_objective,
)
from featforge.proxies import ProxyKind, proxy_score
from featforge.query import (
    CandidateQuery,
    build_space,
    build_template,
    decode,
    execute_many,
    render_sql,
)
from featforge.seeding import derive_seed
from featforge.table import Column, ColumnKind, Table, load_csv, split, write_csv
from featforge.templates import (
    IdentConfig,
    TemplateIngredients,
    identify_templates,
)
from featforge.tpe import TpeConfig, random_run, warm_start_run

MODES = ("feataug", "random", "featuretools")

ALL_FUNCTION_NAMES = tuple(f.name for f in AggregationFunction)


@dataclass(frozen=True)
class RunConfig:
    train_path: Path
    relevant_path: Path
    train_schema: dict
    relevant_schema: dict
    label: str
    keys: tuple[str, ...]
    agg_columns: tuple[str, ...]
    attrs: tuple[str, ...]
    agg_functions: tuple[str, ...] = ALL_FUNCTION_NAMES
    task: TaskKind = TaskKind.BINARY
    proxy: ProxyKind = ProxyKind.MI
    mode: str = "feataug"
    n_templates: int = 8
    queries_per_template: int = 5
    warmup_budget: int = 200
    warmup_top_k: int = 50
    final_budget: int = 40
    gamma: float = 0.15
    n_startup: int = 10
    n_ei_candidates: int = 24
    prior_weight: float = 1.0
    beam_width: int = 1
    max_depth: int = 4
    inner_budget: int = 100
    predictor_on: bool = True
    model: ModelSpec = field(default_factory=ModelSpec)
    fill: float = 0.0
    split_ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)
    bins: int = 10
    categorical_cap: int = 64
    grid_resolution: int = 20
    seed: int = 0

    def echo(self) -> dict:
        """JSON-safe view of the resolved configuration."""
        return {
            "train": {"path": str(self.train_path), "schema": dict(self.train_schema)},
            "relevant": {"path": str(self.relevant_path), "schema": dict(self.relevant_schema)},
            "label": self.label,
            "keys": list(self.keys),
            "agg_columns": list(self.agg_columns),
            "agg_functions": list(self.agg_functions),
            "attrs": list(self.attrs),
            "task": self.task.value,
            "proxy": self.proxy.value,
            "mode": self.mode,
            "n_templates": self.n_templates,
            "queries_per_template": self.queries_per_template,
            "budgets": {
                "warmup": self.warmup_budget,
                "top_k": self.warmup_top_k,
                "final": self.final_budget,
            },
            "tpe": {
                "gamma": self.gamma,
                "n_startup": self.n_startup,
                "n_ei_candidates": self.n_ei_candidates,
                "prior_weight": self.prior_weight,
            },
            "ident": {
                "beam_width": self.beam_width,
                "max_depth": self.max_depth,
                "inner_budget": self.inner_budget,
                "predictor_on": self.predictor_on,
            },
            "model": {
                "kind": self.model.kind,
                "learning_rate": self.model.learning_rate,
                "epochs": self.model.epochs,
                "l2": self.model.l2,
            },
            "fill": self.fill,
            "split": list(self.split_ratios),
            "bins": self.bins,
            "categorical_cap": self.categorical_cap,
            "grid_resolution": self.grid_resolution,
            "seed": self.seed,
        }


_TOP_LEVEL_KEYS = {
    "train", "relevant", "label", "keys", "agg_columns", "agg_functions", "attrs",
    "task", "proxy", "mode", "n_templates", "queries_per_template", "budgets",
    "tpe", "ident", "model", "fill", "split", "bins", "categorical_cap",
    "grid_resolution", "seed", "out_dir",
}


def load_config(path: str | Path, overrides: dict | None = None) -> tuple[RunConfig, Path | None]:
    """Parse a JSON config file; CLI overrides replace config keys one-for-one.

    Relative data paths resolve against the config file's directory. Returns
    the config plus the configured output directory, if any.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    unknown = set(raw) - _TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value

    def need(key):
        if key not in raw:
            raise ConfigError(f"{path}: missing required key {key!r}")
        return raw[key]

    def table_ref(key):
        ref = need(key)
        if not isinstance(ref, dict) or "path" not in ref or "schema" not in ref:
            raise ConfigError(f"{path}: {key!r} needs 'path' and 'schema'")
        data_path = Path(ref["path"])
        if not data_path.is_absolute():
            data_path = path.parent / data_path
        return data_path, dict(ref["schema"])

    train_path, train_schema = table_ref("train")
    relevant_path, relevant_schema = table_ref("relevant")
    budgets = raw.get("budgets", {})
    tpe = raw.get("tpe", {})
    ident = raw.get("ident", {})
    model_raw = raw.get("model", {})

    mode = raw.get("mode", "feataug")
    if mode not in MODES:
        raise ConfigError(f"{path}: mode must be one of {MODES}, got {mode!r}")
    try:
        task = TaskKind(raw.get("task", "binary"))
        proxy = ProxyKind(raw.get("proxy", "mi"))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None

    fns = tuple(raw.get("agg_functions", ALL_FUNCTION_NAMES))
    bad_fns = [f for f in fns if f not in ALL_FUNCTION_NAMES]
    if bad_fns:
        raise ConfigError(f"{path}: unknown aggregation functions {bad_fns}")

    default_kind = {"binary": "logistic", "multiclass": "ovr_logistic", "regression": "linear"}
    try:
        model = ModelSpec(
            kind=model_raw.get("kind", default_kind[task.value]),
            learning_rate=model_raw.get("learning_rate", 0.1),
            epochs=model_raw.get("epochs", 300),
            l2=model_raw.get("l2", 1e-4),
        )
        config = RunConfig(
            train_path=train_path,
            relevant_path=relevant_path,
            train_schema=train_schema,
            relevant_schema=relevant_schema,
            label=need("label"),
            keys=tuple(need("keys")),
            agg_columns=tuple(need("agg_columns")),
            attrs=tuple(need("attrs")),
            agg_functions=fns,
            task=task,
            proxy=proxy,
            mode=mode,
            n_templates=int(raw.get("n_templates", 8)),
            queries_per_template=int(raw.get("queries_per_template", 5)),
            warmup_budget=int(budgets.get("warmup", 200)),
            warmup_top_k=int(budgets.get("top_k", 50)),
            final_budget=int(budgets.get("final", 40)),
            gamma=float(tpe.get("gamma", 0.15)),
            n_startup=int(tpe.get("n_startup", 10)),
            n_ei_candidates=int(tpe.get("n_ei_candidates", 24)),
            prior_weight=float(tpe.get("prior_weight", 1.0)),
            beam_width=int(ident.get("beam_width", 1)),
            max_depth=int(ident.get("max_depth", 4)),
            inner_budget=int(ident.get("inner_budget", 100)),
            predictor_on=bool(ident.get("predictor_on", True)),
            model=model,
            fill=float(raw.get("fill", 0.0)),
            split_ratios=tuple(raw.get("split", (0.6, 0.2, 0.2))),
            bins=int(raw.get("bins", 10)),
            categorical_cap=int(raw.get("categorical_cap", 64)),
            grid_resolution=int(raw.get("grid_resolution", 20)),
            seed=int(raw.get("seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    out_dir = Path(raw["out_dir"]) if "out_dir" in raw else None
    return config, out_dir


@dataclass
class RunReport:
    config: dict
    templates: list
    queries: list
    cost_ledger: dict
    metrics: dict
    seed: int
    audit: dict

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "templates": self.templates,
            "queries": self.queries,
            "cost_ledger": self.cost_ledger,
            "metrics": self.metrics,
            "seed": self.seed,
            "audit": self.audit,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        return cls(**{k: data[k] for k in ("config", "templates", "queries",
                                           "cost_ledger", "metrics", "seed", "audit")})


@dataclass
class KeptQuery:
    query: CandidateQuery
    sql: str
    template_rank: int
    validation_loss: float


@dataclass
class RunResult:
    report: RunReport
    augmented: Table
    kept_queries: list[KeptQuery] = field(default_factory=list)


class _Counter:
    def __init__(self):
        self.count = 0
        self._lock = threading.Lock()

    def wrap(self, fn):
        def counted(*args, **kwargs):
            with self._lock:
                self.count += 1
            return fn(*args, **kwargs)

        return counted


@contextmanager
def _stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def _labels(table: Table, config: RunConfig) -> np.ndarray:
    col = table.column(config.label)
    if col.mask.any():
        raise DataError(f"label column {config.label!r} contains nulls")
    if config.task.is_classification:
        return col.data.astype(np.int64)
    return col.data.astype(np.float64)


def _base_feature_names(config: RunConfig, train: Table) -> list[str]:
    skip = {config.label, *config.keys}
    names = []
    for col in train.columns:
        if col.name in skip or col.kind is ColumnKind.TEXT:
            continue
        names.append(col.name)
    return names


def _matrix(table: Table, names: list[str], fill: float) -> np.ndarray:
    if not names:
        return np.empty((table.row_count, 0))
    cols = []
    for name in names:
        col = table.column(name)
        values = col.data.astype(np.float64)
        cols.append(np.where(col.mask, fill, values))  # null base cells take the fill value
    return np.column_stack(cols)


def _validate(config: RunConfig, train: Table, relevant: Table) -> None:
    problems = []
    if config.label not in train:
        problems.append(f"label {config.label!r} not in training table")
    if not config.keys or not config.agg_columns or not config.attrs:
        problems.append("keys, agg_columns and attrs must be non-empty")
    for key in config.keys:
        if key not in train or key not in relevant:
            problems.append(f"key {key!r} must exist in both tables")
    for col in config.agg_columns:
        if col not in relevant:
            problems.append(f"aggregation column {col!r} not in relevant table")
    for col in config.attrs:
        if col not in relevant:
            problems.append(f"predicate attribute {col!r} not in relevant table")
    if len(config.split_ratios) != 3 or abs(sum(config.split_ratios) - 1.0) > 1e-9:
        problems.append(f"split must be three ratios summing to 1, got {config.split_ratios}")
    if config.n_templates < 1 or config.queries_per_template < 1:
        problems.append("n_templates and queries_per_template must be >= 1")
    if not config.warmup_budget >= config.warmup_top_k >= 1:
        problems.append("budgets must satisfy warmup >= top_k >= 1")
    if problems:
        raise ConfigError("; ".join(problems))


def _random_subsets(attrs: tuple[str, ...], n: int, seed: int) -> list[tuple[str, ...]]:
    """Uniformly random distinct predicate-attribute subsets (the empty set included)."""
    total = 2 ** len(attrs)
    rng = np.random.default_rng(seed)
    if total <= 1 << 16:
        picks = rng.choice(total, size=min(n, total), replace=False)
    else:
        chosen: set[int] = set()
        while len(chosen) < n:
            chosen.add(int(rng.integers(0, total)))
        picks = sorted(chosen)
    return [
        tuple(a for j, a in enumerate(attrs) if (int(mask) >> j) & 1)
        for mask in picks
    ]


def _mapper_from_env():
    workers = int(os.environ.get("FEATFORGE_WORKERS", "1"))
    if workers <= 1:
        return None, None
    pool = ThreadPoolExecutor(max_workers=workers)
    return (lambda fn, items: list(pool.map(fn, items))), pool


def run_pipeline(config: RunConfig) -> RunResult:
    with _stage("load"):
        train_full = load_csv(config.train_path, config.train_schema)
        relevant = load_csv(config.relevant_path, config.relevant_schema)
        _validate(config, train_full, relevant)

    with _stage("split"):
        train_t, valid_t, test_t = split(
            train_full, config.split_ratios, derive_seed(config.seed, "split")
        )
        y_train = _labels(train_t, config)
        y_valid = _labels(valid_t, config)
        base_names = _base_feature_names(config, train_full)
        base_train = _matrix(train_t, base_names, config.fill)
        base_valid = _matrix(valid_t, base_names, config.fill)

    fns = tuple(AggregationFunction[name] for name in config.agg_functions)
    ingredients = TemplateIngredients(fns, config.agg_columns, config.keys)
    search_counter = _Counter()

    def real_objective_for(space):
        def objective(vector):
            out = query_objective(
                decode(space, vector), relevant, train_t, valid_t,
                base_train, base_valid, y_train, y_valid,
                config.model, config.task, config.fill,
            )
            return out.value

        return search_counter.wrap(objective)

    def proxy_objective_for(space):
        def objective(vector):
            feature = execute_many(
                decode(space, vector), relevant, [train_t], config.fill
            )[0]
            score = proxy_score(
                config.proxy, feature, y_train, config.task, config.bins,
                derive_seed(config.seed, "proxy"),
            )
            return -score.value

        return objective

    templates_report: list[dict] = []
    ledger_report = {
        "proxy_evaluations": 0,
        "predictions": 0,
        "baseline_evaluations": 0,
        "output_truncated": False,
        "objective_evaluations": 0,
    }
    kept: list[KeptQuery] = []
    kept_sqls: set[str] = set()
    mapper, pool = _mapper_from_env()

    def keep_top(history, space, template_rank):
        ranked = sorted(history.trials, key=lambda t: (t.objective, t.iteration))
        taken = 0
        for trial in ranked:
            if taken == config.queries_per_template:
                break
            if trial.objective >= WORST_LOSS:
                continue
            query = decode(space, trial.vector)
            sql = render_sql(query, relevant.name)
            if sql in kept_sqls:
                continue
            kept_sqls.add(sql)
            kept.append(KeptQuery(query, sql, template_rank, float(trial.objective)))
            taken += 1

    try:
        if config.mode == "feataug":
            with _stage("identify"):
                ident_cfg = IdentConfig(
                    beam_width=config.beam_width,
                    max_depth=min(config.max_depth, len(config.attrs)),
                    inner_budget=config.inner_budget,
                    n_out=config.n_templates,
                    predictor_on=config.predictor_on,
                    seed=derive_seed(config.seed, "identify"),
                )
                nodes, ledger = identify_templates(
                    train_t, y_train, relevant, ingredients, list(config.attrs),
                    ident_cfg, config.proxy, config.task, config.fill, config.bins,
                    config.categorical_cap, config.grid_resolution,
                )
                ledger_report.update(
                    proxy_evaluations=ledger.proxy_evaluations,
                    predictions=ledger.predictions,
                    baseline_evaluations=ledger.baseline_evaluations,
                    output_truncated=ledger.output_truncated,
                )
            with _stage("search"):
                for rank, node in enumerate(nodes):
                    templates_report.append(
                        {"rank": rank, "attrs": list(node.attrs),
                         "proxy_effectiveness": node.proxy_value}
                    )
                    template = build_template(
                        relevant, fns, config.agg_columns, node.attrs, config.keys
                    )
                    space = build_space(
                        template, relevant, config.categorical_cap, config.grid_resolution
                    )
                    history = warm_start_run(
                        proxy_objective_for(space), real_objective_for(space), space,
                        config.warmup_budget, config.warmup_top_k, config.final_budget,
                        TpeConfig(config.gamma, config.n_startup, config.n_ei_candidates,
                                  config.prior_weight, derive_seed(config.seed, "search", rank)),
                        mapper=mapper,
                    )
                    keep_top(history, space, rank)

        elif config.mode == "random":
            with _stage("identify"):
                subsets = _random_subsets(
                    config.attrs, config.n_templates,
                    derive_seed(config.seed, "random-templates"),
                )
            with _stage("search"):
                budget = config.warmup_top_k + config.final_budget
                for rank, attrs in enumerate(subsets):
                    templates_report.append(
                        {"rank": rank, "attrs": list(attrs), "proxy_effectiveness": None}
                    )
                    template = build_template(
                        relevant, fns, config.agg_columns, attrs, config.keys
                    )
                    space = build_space(
                        template, relevant, config.categorical_cap, config.grid_resolution
                    )
                    history = random_run(
                        real_objective_for(space), space, budget,
                        derive_seed(config.seed, "search", rank),
                    )
                    keep_top(history, space, rank)

        else:  # featuretools: every predicate-free query, proxy-ranked
            with _stage("enumerate"):
                template = build_template(relevant, fns, config.agg_columns, (), config.keys)
                space = build_space(template, relevant)
                templates_report.append(
                    {"rank": 0, "attrs": [], "proxy_effectiveness": None}
                )
                candidates = []
                for fi in range(len(fns)):
                    for ai in range(len(config.agg_columns)):
                        vector = (fi, ai) + (1,) * len(config.keys)
                        query = decode(space, vector)
                        feature = execute_many(query, relevant, [train_t], config.fill)[0]
                        score = proxy_score(
                            config.proxy, feature, y_train, config.task, config.bins,
                            derive_seed(config.seed, "proxy"),
                        )
                        candidates.append((score.value, render_sql(query, relevant.name), query))
                candidates.sort(key=lambda c: (-c[0], c[1]))
                target = config.n_templates * config.queries_per_template
                for _, sql, query in candidates[:target]:
                    search_counter.count += 1
                    vloss = query_objective(
                        query, relevant, train_t, valid_t, base_train, base_valid,
                        y_train, y_valid, config.model, config.task, config.fill,
                    ).value
                    kept_sqls.add(sql)
                    kept.append(KeptQuery(query, sql, 0, float(vloss)))
    finally:
        if pool is not None:
            pool.shutdown()

    ledger_report["objective_evaluations"] = search_counter.count

    with _stage("final-evaluation"):
        test_reads_before_final = test_t.reads
        y_test = _labels(test_t, config)
        base_test = _matrix(test_t, base_names, config.fill)

        feature_sets: dict[str, list[FeatureColumn]] = {"train": [], "valid": [], "test": [], "full": []}
        queries_report = []
        for index, item in enumerate(kept):
            f_train, f_valid, f_test, f_full = execute_many(
                item.query, relevant, [train_t, valid_t, test_t, train_full], config.fill
            )
            feature_sets["train"].append(f_train)
            feature_sets["valid"].append(f_valid)
            feature_sets["test"].append(f_test)
            feature_sets["full"].append(f_full)
            report_proxy = proxy_score(
                config.proxy, f_train, y_train, config.task, config.bins,
                derive_seed(config.seed, "proxy"),
            )
            queries_report.append(
                {
                    "index": index,
                    "feature": f"feat_{index}",
                    "sql": item.sql,
                    "template_rank": item.template_rank,
                    "validation_loss": item.validation_loss,
                    "proxy_score": report_proxy.value,
                    "missing_fraction": f_train.missing_fraction,
                }
            )

        def stack(base, features):
            if not features:
                return base
            return np.column_stack([base] + [f.values for f in features])

        metrics: dict = {"metric": config.task.metric_name,
                         "n_base_features": len(base_names),
                         "n_added_features": len(kept)}
        base_model = fit(base_train, y_train, config.model)
        metrics["base"] = {
            "validation": loss(base_model, base_valid, y_valid, config.task).metric_raw,
            "test": loss(base_model, base_test, y_test, config.task).metric_raw,
        }
        if kept:
            aug_model = fit(stack(base_train, feature_sets["train"]), y_train, config.model)
            metrics["augmented"] = {
                "validation": loss(
                    aug_model, stack(base_valid, feature_sets["valid"]), y_valid, config.task
                ).metric_raw,
                "test": loss(
                    aug_model, stack(base_test, feature_sets["test"]), y_test, config.task
                ).metric_raw,
            }
        else:
            metrics["augmented"] = dict(metrics["base"])
            metrics["no_features_kept"] = True

        augmented_columns = list(train_full.columns)
        for index, feature in enumerate(feature_sets["full"]):
            augmented_columns.append(
                Column(f"feat_{index}", ColumnKind.FLOAT, feature.values.copy(),
                       np.zeros(train_full.row_count, dtype=bool))
            )
        augmented = Table(train_full.name, augmented_columns)

    report = RunReport(
        config=config.echo(),
        templates=templates_report,
        queries=queries_report,
        cost_ledger=ledger_report,
        metrics=metrics,
        seed=config.seed,
        audit={"test_reads_before_final_eval": test_reads_before_final},
    )
    return RunResult(report, augmented, kept)


def write_outputs(result: RunResult, out_dir: str | Path) -> dict[str, Path]:
    """Write report.json, queries.sql and augmented.csv; deterministic bytes."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        report_path = out / "report.json"
        report_path.write_text(
            json.dumps(result.report.to_dict(), indent=2, sort_keys=True) + "\n"
        )
        sql_path = out / "queries.sql"
        sql_path.write_text("".join(q["sql"] + "\n" for q in result.report.queries))
        csv_path = out / "augmented.csv"
        write_csv(result.augmented, csv_path)
    except OSError as exc:
        raise DataError(f"cannot write outputs under {out}: {exc}") from exc
    return {"report": report_path, "queries": sql_path, "augmented": csv_path}
