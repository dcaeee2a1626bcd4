import dataclasses
import json

import numpy as np
import pytest

from featforge.cli import main as cli_main
from featforge.errors import ConfigError, StageError
from featforge.models import query_objective
from featforge.pipeline import RunReport, RunResult, load_config, run_pipeline, write_outputs
from featforge.synth import SynthSpec, write_benchmark
from featforge.table import load_csv, split
from featforge.seeding import derive_seed


@pytest.fixture(scope="module")
def bench_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("bench")
    write_benchmark(SynthSpec(rows=240, relevant_rows=2400, n_attrs=6, seed=1), out)
    return out


def small_config(bench_dir, **overrides):
    config, _ = load_config(bench_dir / "config.json")
    shrink = dict(
        warmup_budget=25, warmup_top_k=8, final_budget=8,
        inner_budget=8, n_templates=4, queries_per_template=3,
    )
    shrink.update(overrides)
    return dataclasses.replace(config, **shrink)


@pytest.fixture(scope="module")
def feataug_result(bench_dir):
    return run_pipeline(small_config(bench_dir, seed=7))


class TestLoadConfig:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.json")

    def test_unknown_keys_rejected(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"surprise": 1}))
        with pytest.raises(ConfigError, match="unknown config keys"):
            load_config(p)

    def test_missing_required_key(self, tmp_path, bench_dir):
        raw = json.loads((bench_dir / "config.json").read_text())
        del raw["label"]
        p = tmp_path / "c.json"
        p.write_text(json.dumps(raw))
        with pytest.raises(ConfigError, match="label"):
            load_config(p)

    def test_bad_mode(self, tmp_path, bench_dir):
        raw = json.loads((bench_dir / "config.json").read_text())
        raw["mode"] = "magic"
        p = tmp_path / "c.json"
        p.write_text(json.dumps(raw))
        with pytest.raises(ConfigError, match="mode"):
            load_config(p)

    def test_overrides_take_effect(self, bench_dir):
        config, _ = load_config(bench_dir / "config.json", {"mode": "random", "seed": 55})
        assert config.mode == "random" and config.seed == 55

    def test_empty_keys_rejected(self, bench_dir):
        config = small_config(bench_dir, keys=())
        with pytest.raises(StageError, match="non-empty"):
            run_pipeline(config)

    def test_bad_split_rejected(self, bench_dir):
        config = small_config(bench_dir, split_ratios=(0.5, 0.5))
        with pytest.raises(StageError, match="three ratios"):
            run_pipeline(config)

    def test_relative_paths_resolve_against_config_dir(self, bench_dir):
        config, _ = load_config(bench_dir / "config.json")
        assert config.train_path.is_absolute()
        assert config.train_path.exists()


class TestRunPipeline:
    def test_feature_count(self, feataug_result):
        assert feataug_result.report.metrics["n_added_features"] == 4 * 3
        assert len(feataug_result.report.queries) == 12

    def test_report_top_level_keys(self, feataug_result):
        data = feataug_result.report.to_dict()
        assert set(data) == {"config", "templates", "queries", "cost_ledger",
                             "metrics", "seed", "audit"}

    def test_report_round_trips_through_json(self, feataug_result):
        data = feataug_result.report.to_dict()
        re_parsed = RunReport.from_dict(json.loads(json.dumps(data)))
        assert re_parsed == feataug_result.report

    def test_no_test_reads_before_final_evaluation(self, feataug_result):
        assert feataug_result.report.audit["test_reads_before_final_eval"] == 0

    def test_deterministic_reports(self, bench_dir):
        config = small_config(bench_dir, seed=13, n_templates=2, queries_per_template=2)
        a = run_pipeline(config).report
        b = run_pipeline(config).report
        assert a == b

    def test_feature_count_parity_across_modes(self, bench_dir, feataug_result):
        counts = {"feataug": feataug_result.report.metrics["n_added_features"]}
        for mode in ("random", "featuretools"):
            config = small_config(bench_dir, seed=7, mode=mode)
            counts[mode] = run_pipeline(config).report.metrics["n_added_features"]
        assert counts["feataug"] == counts["random"] == counts["featuretools"] == 12

    def test_reported_losses_match_reexecution(self, bench_dir, feataug_result):
        config = small_config(bench_dir, seed=7)
        relevant = load_csv(config.relevant_path, config.relevant_schema)
        train_full = load_csv(config.train_path, config.train_schema)
        train_t, valid_t, _ = split(
            train_full, config.split_ratios, derive_seed(config.seed, "split")
        )
        y_train = train_t.column("label").data.astype(np.int64)
        y_valid = valid_t.column("label").data.astype(np.int64)
        base_cols = ["base_1", "base_2"]

        def matrix(t):
            return np.column_stack([t.column(c).data.astype(float) for c in base_cols])

        for record, kept in zip(feataug_result.report.queries, feataug_result.kept_queries):
            assert record["sql"] == kept.sql
            out = query_objective(
                kept.query, relevant, train_t, valid_t,
                matrix(train_t), matrix(valid_t), y_train, y_valid,
                config.model, config.task, config.fill,
            )
            assert out.value == pytest.approx(record["validation_loss"], abs=1e-9)

    def test_featuretools_enumeration_size(self, bench_dir):
        config = small_config(
            bench_dir, seed=3, mode="featuretools",
            agg_functions=("SUM", "AVG", "MAX"), agg_columns=("val_x",),
        )
        result = run_pipeline(config)
        assert result.report.metrics["n_added_features"] == 3  # 3 fns x 1 column, all kept
        assert all(" WHERE " not in q["sql"] for q in result.report.queries)

    def test_bad_column_reported_as_stage_error(self, bench_dir):
        config = small_config(bench_dir, label="not_a_column")
        with pytest.raises(StageError, match="load"):
            run_pipeline(config)

    def test_worker_pool_keeps_results_identical(self, bench_dir, monkeypatch):
        config = small_config(bench_dir, seed=19, n_templates=2, queries_per_template=2)
        sequential = run_pipeline(config).report
        monkeypatch.setenv("FEATFORGE_WORKERS", "4")
        parallel = run_pipeline(config).report
        assert sequential == parallel


class TestWriteOutputs:
    def test_files_and_column_counts(self, feataug_result, tmp_path):
        paths = write_outputs(feataug_result, tmp_path / "out")
        header = paths["augmented"].read_text().splitlines()[0]
        n_base_cols = 4  # uid, base_1, base_2, label
        assert len(header.split(",")) == n_base_cols + 12
        assert header.split(",")[n_base_cols:] == [f"feat_{i}" for i in range(12)]
        sql_lines = paths["queries"].read_text().splitlines()
        assert len(sql_lines) == 12
        assert all(line.startswith("SELECT uid, ") for line in sql_lines)

    def test_report_json_parses_back(self, feataug_result, tmp_path):
        paths = write_outputs(feataug_result, tmp_path / "out2")
        parsed = RunReport.from_dict(json.loads(paths["report"].read_text()))
        assert parsed == feataug_result.report

    def test_zero_kept_features_writes_original_table(self, bench_dir, tmp_path):
        config = small_config(bench_dir)
        train_full = load_csv(config.train_path, config.train_schema)
        report = RunReport(
            config=config.echo(), templates=[], queries=[],
            cost_ledger={}, metrics={"no_features_kept": True}, seed=0, audit={},
        )
        paths = write_outputs(RunResult(report, train_full), tmp_path / "empty")
        assert paths["augmented"].read_text() == (config.train_path).read_text()
        assert paths["queries"].read_text() == ""


class TestCli:
    def test_synth_then_run_exit_zero(self, tmp_path, capsys):
        out = tmp_path / "b"
        assert cli_main(["synth", "--rows", "60", "--relevant-rows", "600",
                         "--seed", "2", "--out", str(out)]) == 0
        raw = json.loads((out / "config.json").read_text())
        raw.update(n_templates=2, queries_per_template=2,
                   budgets={"warmup": 10, "top_k": 4, "final": 4},
                   ident={"inner_budget": 4})
        (out / "config.json").write_text(json.dumps(raw))
        code = cli_main(["run", "--config", str(out / "config.json"),
                         "--out", str(tmp_path / "run_out")])
        assert code == 0
        assert (tmp_path / "run_out" / "report.json").exists()
        assert "augmented" in capsys.readouterr().out

    def test_config_error_exits_2(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({"mode": "nope"}))
        assert cli_main(["run", "--config", str(p)]) == 2

    def test_data_error_exits_3(self, tmp_path, bench_dir, capsys):
        raw = json.loads((bench_dir / "config.json").read_text())
        raw["train"]["path"] = "missing.csv"
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(raw))
        assert cli_main(["run", "--config", str(p)]) == 3
