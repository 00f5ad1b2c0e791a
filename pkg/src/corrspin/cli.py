"""Command-line entry point: one subcommand per scenario.

Exit codes: 0 success, 1 config error, 2 validation failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from datetime import datetime
from pathlib import Path

from .errors import ConfigError, InputError, IntegrationDivergedError, ResourceLimitError
from .experiments import (
    SCENARIOS,
    default_config,
    load_config,
    run_scenario,
    write_result,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corrspin",
        description="Spin-network dynamics under spatially correlated noise",
    )
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        p = sub.add_parser(name, help=f"run the {name} scenario")
        p.add_argument("--config", type=Path, default=None, help="key=value config file")
        p.add_argument("--out", type=Path, default=Path("."), help="output parent directory")
        p.add_argument("--workers", type=int, default=None, help="sweep worker processes")
        p.add_argument(
            "--engine", choices=("full", "reduced", "auto"), default=None,
            help="override the engine selection",
        )
        p.add_argument(
            "--seed", type=int, default=None,
            help="reserved; dynamics are deterministic (recorded in summary.json)",
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            cfg = load_config(args.config, scenario=args.scenario)
        else:
            cfg = default_config(args.scenario)
        overrides = {}
        if args.workers is not None:
            overrides["workers"] = args.workers
        if args.engine is not None:
            overrides["engine"] = args.engine
        if args.seed is not None:
            overrides["seed"] = args.seed
        if overrides:
            cfg = replace(cfg, **overrides)
        result = run_scenario(cfg)
    except (ConfigError, InputError, ResourceLimitError, IntegrationDivergedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    stamp = datetime.now().strftime("%Y%m%d-%H%M%S-%f")
    try:
        out_dir = write_result(result, args.out / f"{args.scenario}_{stamp}")
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out_dir}/data.csv and summary.json")
    if result.scenario == "validate":
        for check in result.summary["checks"]:
            status = "pass" if check["passed"] else "FAIL"
            print(f"  [{status}] {check['name']}: {check['detail']}")
        if not result.summary["all_passed"]:
            print("validation failed", file=sys.stderr)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
