"""Command-line entry point.

Subcommands:
  synth      write a deterministic synthetic data file
  decompose  decompose the pm25 column and export modes + metadata
  run        run the configured (model, horizon, replicate) grid
  report     rebuild the derived tables from stored prediction traces
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, ExperimentConfig
from .datapipe import OrderingError, PipelineError, SchemaError
from .decomposition import DecompositionError
from .experiment import rebuild_report, run_decompose, run_experiment, run_synth

__all__ = ["main", "build_parser"]

_USER_ERRORS = (ConfigError, SchemaError, OrderingError, PipelineError, DecompositionError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridcast",
        description="Decomposition-augmented temporal convolutional forecasting harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="experiment config file (INI key-value format)")
        p.add_argument("--seed", type=int, help="override the base seed")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--jobs", type=int, help="worker processes (1 = fully deterministic)")

    p_run = sub.add_parser("run", help="run the experiment grid and write reports")
    common(p_run)

    p_dec = sub.add_parser("decompose", help="decompose the pm25 series to a mode table")
    common(p_dec)

    p_synth = sub.add_parser("synth", help="generate a synthetic data file")
    p_synth.add_argument("--hours", type=int, default=2000)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True, help="output data file path")

    p_rep = sub.add_parser("report", help="rebuild report tables from prediction traces")
    p_rep.add_argument("run_dir", help="directory containing predictions_*.csv")

    return parser


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.base_seed = args.seed
        cfg.data_seed = args.seed
        cfg.decomposition_seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    if args.jobs is not None:
        cfg.jobs = args.jobs
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            return run_synth(args.hours, args.seed, args.out)
        if args.command == "report":
            return rebuild_report(args.run_dir)
        cfg = _load_config(args)
        if args.command == "decompose":
            return run_decompose(cfg)
        if args.command == "run":
            return run_experiment(cfg)
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
