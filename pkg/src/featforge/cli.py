"""Command-line interface: `featforge run` and `featforge synth`."""

from __future__ import annotations

import argparse
import sys

from featforge.errors import ConfigError, DataError, StageError
from featforge.pipeline import MODES, load_config, run_pipeline, write_outputs
from featforge.synth import SynthSpec, write_benchmark


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="featforge",
        description="Search predicate-aware aggregation queries that augment a "
        "training table with features from a one-to-many relevant table.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the full augmentation pipeline")
    run_p.add_argument("--config", required=True, help="JSON run configuration")
    run_p.add_argument("--mode", choices=MODES, help="override the configured mode")
    run_p.add_argument("--seed", type=int, help="override the configured seed")
    run_p.add_argument("--proxy", choices=["mi", "spearman", "lr"], help="override the low-cost proxy")
    run_p.add_argument("--out", help="output directory (default: featforge_out)")

    synth_p = sub.add_parser("synth", help="generate the planted-signal benchmark")
    synth_p.add_argument("--rows", type=int, default=2000, help="training rows")
    synth_p.add_argument("--relevant-rows", type=int, default=20000, help="relevant-table rows")
    synth_p.add_argument("--attrs", type=int, default=6, help="number of predicate attributes")
    synth_p.add_argument("--seed", type=int, default=0)
    synth_p.add_argument("--out", required=True, help="directory for csv files and config.json")
    return parser


def _exit_code(exc: Exception) -> int:
    cause = exc.cause if isinstance(exc, StageError) else exc
    if isinstance(cause, ConfigError):
        return 2
    if isinstance(cause, (DataError, OSError)):
        return 3
    return 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            spec = SynthSpec(args.rows, args.relevant_rows, args.attrs, args.seed)
            config_path = write_benchmark(spec, args.out)
            print(f"wrote benchmark under {config_path.parent} (config: {config_path})")
            return 0

        overrides = {"mode": args.mode, "seed": args.seed, "proxy": args.proxy}
        config, configured_out = load_config(args.config, overrides)
        result = run_pipeline(config)
        out_dir = args.out or configured_out or "featforge_out"
        paths = write_outputs(result, out_dir)
        metrics = result.report.metrics
        print(
            f"mode={config.mode} seed={config.seed} features={metrics['n_added_features']} "
            f"{metrics['metric']}: base valid={metrics['base']['validation']:.4f} "
            f"test={metrics['base']['test']:.4f} | augmented "
            f"valid={metrics['augmented']['validation']:.4f} test={metrics['augmented']['test']:.4f}"
        )
        for name, path in paths.items():
            print(f"  {name}: {path}")
        return 0
    except (ConfigError, DataError, StageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
