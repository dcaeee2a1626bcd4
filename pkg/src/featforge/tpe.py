"""Tree-structured Parzen Estimator over finite mixed search spaces.

Every dimension is a finite choice set (numeric bounds are pre-gridded), so
the per-dimension density estimators are smoothed count densities: after
splitting the history into good and bad trials at the gamma quantile,
candidates are drawn from the good densities and ranked by the density ratio
P_good / P_bad multiplied across dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from featforge.query import SearchSpace

WORST_OBJECTIVE = 1e18


@dataclass(frozen=True)
class TrialRecord:
    vector: tuple
    objective: float  # lower is better
    iteration: int


@dataclass
class TrialHistory:
    trials: list[TrialRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.trials)

    @property
    def best_index(self) -> int:
        return min(range(len(self.trials)), key=lambda i: (self.trials[i].objective, i))

    @property
    def best(self) -> TrialRecord:
        return self.trials[self.best_index]


@dataclass(frozen=True)
class TpeConfig:
    gamma: float = 0.15
    n_startup: int = 10
    n_ei_candidates: int = 24
    prior_weight: float = 1.0
    seed: int = 0
    worst_value: float = WORST_OBJECTIVE

    def __post_init__(self):
        if not 0.0 < self.gamma <= 0.5:
            raise ValueError("gamma must be in (0, 0.5]")
        if self.n_startup < 1 or self.n_ei_candidates < 1 or self.prior_weight <= 0:
            raise ValueError("invalid TPE configuration")


def sample_uniform(space: SearchSpace, rng: np.random.Generator) -> tuple:
    """Each dimension independently uniform over its finite domain."""
    return tuple(dim.choices[rng.integers(0, len(dim.choices))] for dim in space.dims)


def split_good_bad(history: TrialHistory, gamma: float) -> tuple[list[TrialRecord], list[TrialRecord]]:
    """Good = the ceil(gamma*N) lowest-objective trials, earlier iteration first on ties."""
    if not history.trials:
        raise ValueError("history must be non-empty")
    n_good = math.ceil(gamma * len(history.trials))
    ranked = sorted(history.trials, key=lambda t: (t.objective, t.iteration))
    return ranked[:n_good], ranked[n_good:]


def propose(space: SearchSpace, history: TrialHistory, cfg: TpeConfig, rng: np.random.Generator) -> tuple:
    """Draw candidates from the good densities, return the best density ratio."""
    good, bad = split_good_bad(history, cfg.gamma)
    n_cand = cfg.n_ei_candidates
    log_ratio = np.zeros(n_cand)
    drawn_idx = []
    for d, dim in enumerate(space.dims):
        k = len(dim.choices)
        good_counts = np.full(k, cfg.prior_weight)
        bad_counts = np.full(k, cfg.prior_weight)
        for trial in good:
            good_counts[dim.index_of(trial.vector[d])] += 1.0
        for trial in bad:
            bad_counts[dim.index_of(trial.vector[d])] += 1.0
        p_good = good_counts / good_counts.sum()
        p_bad = bad_counts / bad_counts.sum()
        idx = rng.choice(k, size=n_cand, p=p_good)
        log_ratio += np.log(p_good[idx]) - np.log(p_bad[idx])
        drawn_idx.append(idx)
    best = int(np.argmax(log_ratio))  # ties resolve to the first drawn
    return tuple(dim.choices[drawn_idx[d][best]] for d, dim in enumerate(space.dims))


def _evaluate(objective, vector: tuple, worst: float) -> float:
    try:
        value = float(objective(vector))
    except Exception:
        return worst
    if not math.isfinite(value):
        return worst
    return value


def tpe_run(
    objective,
    space: SearchSpace,
    budget: int,
    cfg: TpeConfig,
    init: list[TrialRecord] | None = None,
) -> TrialHistory:
    """Run `budget` evaluations, seeding the surrogate with `init` if given.

    Random sampling covers the first max(0, n_startup - len(init)) iterations;
    vectors already in the history are never re-evaluated (up to 16 uniform
    redraws, then the cached value is recorded as a duplicate trial).
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(cfg.seed)
    history = TrialHistory()
    cache: dict[tuple, float] = {}
    for rec in init or []:
        history.trials.append(TrialRecord(rec.vector, rec.objective, len(history)))
        cache[rec.vector] = rec.objective

    for _ in range(budget):
        if len(history) < cfg.n_startup:
            vector = sample_uniform(space, rng)
        else:
            vector = propose(space, history, cfg, rng)
        attempts = 0
        while vector in cache and attempts < 16:
            vector = sample_uniform(space, rng)
            attempts += 1
        if vector in cache:
            value = cache[vector]
        else:
            value = _evaluate(objective, vector, cfg.worst_value)
            cache[vector] = value
        history.trials.append(TrialRecord(vector, value, len(history)))
    return history


def warm_start_run(
    proxy_objective,
    real_objective,
    space: SearchSpace,
    warmup_budget: int,
    top_k: int,
    final_budget: int,
    cfg: TpeConfig,
    mapper=None,
) -> TrialHistory:
    """Two-round search: optimize the cheap proxy first, re-evaluate its top-k
    distinct vectors with the real objective, and use them to initialize the
    second, real-objective round. Returns the second round's history.

    `mapper` (a map-like callable) lets callers fan out the k re-evaluations.
    """
    if not warmup_budget >= top_k >= 1:
        raise ValueError("need warmup_budget >= top_k >= 1")
    if final_budget < 1:
        raise ValueError("final_budget must be >= 1")
    round1 = tpe_run(proxy_objective, space, warmup_budget, cfg)

    chosen: list[tuple] = []
    seen: set[tuple] = set()
    for trial in sorted(round1.trials, key=lambda t: (t.objective, t.iteration)):
        if trial.vector in seen:
            continue
        seen.add(trial.vector)
        chosen.append(trial.vector)
        if len(chosen) == top_k:
            break

    run = mapper or map
    values = list(run(lambda v: _evaluate(real_objective, v, cfg.worst_value), chosen))
    init = [TrialRecord(v, val, i) for i, (v, val) in enumerate(zip(chosen, values))]
    return tpe_run(real_objective, space, final_budget, replace(cfg, seed=cfg.seed + 1), init=init)


def random_run(objective, space: SearchSpace, budget: int, seed: int, worst: float = WORST_OBJECTIVE) -> TrialHistory:
    """Pure uniform-sampling baseline under the same evaluation budget."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    history = TrialHistory()
    cache: dict[tuple, float] = {}
    for _ in range(budget):
        vector = sample_uniform(space, rng)
        if vector not in cache:
            cache[vector] = _evaluate(objective, vector, worst)
        history.trials.append(TrialRecord(vector, cache[vector], len(history)))
    return history
