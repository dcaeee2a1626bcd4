import json

import numpy as np
import pytest

from featforge.synth import CUTOFF_QUANTILE, SynthSpec, TARGET_SEGMENT, generate, write_benchmark
from featforge.table import parse_datetime


class TestGenerate:
    def test_shapes_and_attrs(self):
        spec = SynthSpec(rows=100, relevant_rows=1000, n_attrs=6, seed=0)
        train, relevant, attrs = generate(spec)
        assert train.row_count == 100
        assert relevant.row_count == 1000
        assert attrs[0] == "seg" and attrs[1] == "event_time"
        assert len(attrs) == 6
        assert {"uid", "base_1", "base_2", "label"} <= set(train.column_names)
        assert {"val_x", "val_y", "val_z"} <= set(relevant.column_names)

    def test_deterministic(self):
        spec = SynthSpec(rows=60, relevant_rows=600, seed=9)
        t1, r1, _ = generate(spec)
        t2, r2, _ = generate(spec)
        for col in t1.column_names:
            assert [t1.cell(i, col) for i in range(60)] == [t2.cell(i, col) for i in range(60)]
        assert [r1.cell(i, "val_x") for i in range(600)] == [r2.cell(i, "val_x") for i in range(600)]

    def test_signal_needs_the_predicate(self):
        """Per-user averages under the hidden predicate must separate the labels
        far better than unconditional averages."""
        spec = SynthSpec(rows=400, relevant_rows=4000, seed=3)
        train, relevant, _ = generate(spec)
        labels = np.array([train.cell(i, "label") for i in range(train.row_count)])
        t0 = parse_datetime("2023-01-01")
        t1 = parse_datetime("2023-12-31T23:59:59")
        cutoff = t0 + CUTOFF_QUANTILE * (t1 - t0)

        inside_sum = np.zeros(train.row_count)
        inside_n = np.zeros(train.row_count)
        all_sum = np.zeros(train.row_count)
        all_n = np.zeros(train.row_count)
        for i in range(relevant.row_count):
            uid = relevant.cell(i, "uid")
            v = relevant.cell(i, "val_x")
            all_sum[uid] += v
            all_n[uid] += 1
            if relevant.cell(i, "seg") == TARGET_SEGMENT and relevant.cell(i, "event_time") >= cutoff:
                inside_sum[uid] += v
                inside_n[uid] += 1

        def auc_of(feature):
            order = np.argsort(feature)
            ranks = np.empty(len(feature))
            ranks[order] = np.arange(1, len(feature) + 1)
            pos = labels == 1
            return (ranks[pos].sum() - pos.sum() * (pos.sum() + 1) / 2) / (pos.sum() * (~pos).sum())

        filtered = np.where(inside_n > 0, inside_sum / np.maximum(inside_n, 1), 0.0)
        unfiltered = all_sum / all_n
        assert auc_of(filtered) > 0.75
        assert abs(auc_of(unfiltered) - 0.5) < 0.12

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SynthSpec(rows=5, relevant_rows=100)
        with pytest.raises(ValueError):
            SynthSpec(rows=100, relevant_rows=50)
        with pytest.raises(ValueError):
            SynthSpec(n_attrs=1)


class TestWriteBenchmark:
    def test_emits_loadable_bundle(self, tmp_path):
        config_path = write_benchmark(SynthSpec(rows=40, relevant_rows=400, seed=1), tmp_path)
        assert (tmp_path / "train.csv").exists()
        assert (tmp_path / "relevant.csv").exists()
        config = json.loads(config_path.read_text())
        assert config["keys"] == ["uid"]
        assert config["label"] == "label"
        assert set(config["agg_columns"]) == {"val_x", "val_y", "val_z"}

    def test_config_round_trips_through_loader(self, tmp_path):
        from featforge.pipeline import load_config

        config_path = write_benchmark(SynthSpec(rows=40, relevant_rows=400, seed=2), tmp_path)
        config, out_dir = load_config(config_path)
        assert config.train_path == tmp_path / "train.csv"
        assert out_dir is None
        assert config.mode == "feataug"
