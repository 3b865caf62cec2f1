"""Command-line front end: run experiment presets, validate config files."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .config import ConfigError, ScenarioConfig, load_config
from .harness import EXPERIMENTS, emit_results, run_experiment


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfisac",
        description=(
            "Cell-free ISAC drone-detection simulator: joint blocklength/power "
            "optimization with multi-static detection over a sensing grid."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment preset and write CSV results")
    run.add_argument("experiment", choices=EXPERIMENTS + ("all",))
    run.add_argument("--config", type=Path, default=None, help="YAML scenario file")
    run.add_argument(
        "--out", type=Path, default=Path("results"), help="output directory (default: results)"
    )
    run.add_argument("--seed", type=int, default=None, help="override the master seed")
    run.add_argument("--threads", type=int, default=None, help="worker processes for sweeps")
    run.add_argument(
        "--trials", type=int, default=None, help="override in-loop Monte Carlo trials"
    )
    run.add_argument("--quiet", action="store_true", help="suppress progress output")

    val = sub.add_parser("validate", help="validate a scenario file and exit")
    val.add_argument("config_path", type=Path)
    return parser


def _load(path: Path | None) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    return load_config(path)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "validate":
        try:
            load_config(args.config_path)
        except (ConfigError, OSError) as exc:
            print(f"invalid configuration: {exc}", file=sys.stderr)
            return 1
        print(f"{args.config_path}: OK")
        return 0

    try:
        config = _load(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["master_seed"] = args.seed
        if args.threads is not None:
            overrides["workers"] = args.threads
        if args.trials is not None:
            overrides["opt_trials"] = args.trials
        if overrides:
            config = config.replace(**overrides)
    except (ConfigError, OSError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 1

    progress = None if args.quiet else lambda msg: print(msg, flush=True)
    started = time.perf_counter()
    if progress:
        progress(f"running {args.experiment} (seed {config.master_seed})")
    records = run_experiment(args.experiment, config, progress=progress)
    paths = emit_results(records, args.out, config)
    elapsed = time.perf_counter() - started
    print(f"wrote {len(paths)} files to {args.out} in {elapsed:.1f} s")
    for p in paths:
        print(f"  {p}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
