"""Synthetic benchmark with a planted predicate-dependent signal.

Each training row is a user with a latent score. Rows of the relevant table
carry that score in `val_x` only where a hidden equality-plus-range predicate
holds (segment = "red" and event_time past a cutoff); everywhere else `val_x`
is wide noise with a small opposing component sized so that the *unfiltered*
per-user average of `val_x` is uncorrelated with the label. Predicate-free
aggregation therefore recovers almost nothing, while the planted predicate
exposes the signal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from featforge.table import ColumnKind, Table, parse_datetime, table_from_columns, write_csv


@dataclass(frozen=True)
class SynthSpec:
    rows: int = 2000
    relevant_rows: int = 20000
    n_attrs: int = 6  # seg + event_time + distractors
    seed: int = 0

    def __post_init__(self):
        if self.rows < 20 or self.relevant_rows < self.rows:
            raise ValueError("need rows >= 20 and relevant_rows >= rows")
        if self.n_attrs < 2:
            raise ValueError("need at least the two signal attributes")


SEGMENTS = ("blue", "green", "red")
TARGET_SEGMENT = "red"
TIME_START = "2023-01-01"
TIME_END = "2023-12-31T23:59:59"
CUTOFF_QUANTILE = 0.4  # signal lives in event_time >= the 40% point of the year


def generate(spec: SynthSpec) -> tuple[Table, Table, list[str]]:
    """Returns (training table, relevant table, predicate attribute names)."""
    rng = np.random.default_rng(spec.seed)
    n, m = spec.rows, spec.relevant_rows

    signal = rng.normal(size=n)
    label = (signal + 0.3 * rng.normal(size=n) > 0).astype(int)
    train = table_from_columns(
        "train",
        {
            "uid": (ColumnKind.INT, [int(i) for i in range(n)]),
            "base_1": (ColumnKind.FLOAT, list(rng.normal(size=n))),
            "base_2": (ColumnKind.FLOAT, list(rng.normal(size=n))),
            "label": (ColumnKind.INT, [int(v) for v in label]),
        },
    )

    counts = np.full(n, m // n)
    counts[: m % n] += 1
    uid_r = np.repeat(np.arange(n), counts)
    rng.shuffle(uid_r)

    seg = rng.choice(SEGMENTS, size=m)
    t0, t1 = parse_datetime(TIME_START), parse_datetime(TIME_END)
    event_time = rng.integers(t0, t1, size=m)
    cutoff = t0 + CUTOFF_QUANTILE * (t1 - t0)

    inside = (seg == TARGET_SEGMENT) & (event_time >= cutoff)
    match_rate = float(inside.mean())
    # opposing component on the outside rows cancels the unconditional-average slope
    alpha = match_rate / max(1.0 - match_rate, 1e-9)
    user_signal = signal[uid_r]
    val_x = np.where(
        inside,
        user_signal + 0.5 * rng.normal(size=m),
        -alpha * user_signal + 2.0 * rng.normal(size=m),
    )

    columns = {
        "uid": (ColumnKind.INT, [int(v) for v in uid_r]),
        "seg": (ColumnKind.TEXT, [str(s) for s in seg]),
        "event_time": (ColumnKind.DATETIME, [int(v) for v in event_time]),
    }
    attrs = ["seg", "event_time"]
    for j in range(spec.n_attrs - 2):
        if j % 2 == 0:
            name = f"cat_d{j}"
            columns[name] = (ColumnKind.TEXT, [f"g{v}" for v in rng.integers(0, 5, size=m)])
        else:
            name = f"num_d{j}"
            columns[name] = (ColumnKind.FLOAT, list(rng.normal(size=m)))
        attrs.append(name)
    columns["val_x"] = (ColumnKind.FLOAT, [float(v) for v in val_x])
    columns["val_y"] = (ColumnKind.FLOAT, list(rng.normal(size=m)))
    columns["val_z"] = (ColumnKind.FLOAT, list(rng.normal(size=m) * 3.0 + 1.0))

    relevant = table_from_columns("relevant", columns)
    return train, relevant, attrs


def schema_of(table: Table) -> dict[str, str]:
    return {c.name: c.kind.value for c in table.columns}


def write_benchmark(spec: SynthSpec, out_dir: str | Path) -> Path:
    """Write train.csv, relevant.csv and a ready-to-run config.json; returns the config path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train, relevant, attrs = generate(spec)
    write_csv(train, out / "train.csv")
    write_csv(relevant, out / "relevant.csv")
    config = {
        "train": {"path": "train.csv", "schema": schema_of(train)},
        "relevant": {"path": "relevant.csv", "schema": schema_of(relevant)},
        "label": "label",
        "keys": ["uid"],
        "agg_columns": ["val_x", "val_y", "val_z"],
        "attrs": attrs,
        "task": "binary",
        "proxy": "mi",
        "mode": "feataug",
        "seed": spec.seed,
    }
    config_path = out / "config.json"
    config_path.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")
    return config_path
