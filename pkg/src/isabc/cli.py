"""Command-line entry point.

Subcommands: ``run`` (execute a config file), ``sweep`` (ad-hoc sweep
from flags), ``beampattern`` (emit pattern CSVs for one converged
solution), ``runtime`` (wall-clock scaling versus tag count).
Exit codes: 0 ok, 1 configuration error, 2 too many infeasible trials.
"""

from __future__ import annotations

import argparse
import sys

from .harness import (
    ConfigError,
    Sweep,
    config_from_mapping,
    measure_runtime,
    parse_config_file,
    run_experiment,
)

_OVERRIDE_FLAGS = [
    ("--trials", "trials"),
    ("--base-seed", "base_seed"),
    ("--scheme", "scheme"),
    ("--out", "out_dir"),
    ("--values", "sweep_values"),
    ("--m", "m"),
    ("--n", "n"),
    ("--k", "k"),
]


def _add_overrides(parser: argparse.ArgumentParser) -> None:
    for flag, _ in _OVERRIDE_FLAGS:
        parser.add_argument(flag, default=None)
    parser.add_argument("--full-scale", action="store_true",
                        help="full-scale run: 1000 trials, 1e5 randomization draws")


def _collect_overrides(args: argparse.Namespace) -> dict[str, str]:
    mapping = {}
    for flag, key in _OVERRIDE_FLAGS:
        value = getattr(args, flag.lstrip("-").replace("-", "_"))
        if value is not None:
            mapping[key] = value
    return mapping


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isabc",
        description="Transmit-power minimization workbench for backscatter-aided sensing networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the experiment described by a config file")
    p_run.add_argument("config", help="flat key=value config file")
    _add_overrides(p_run)

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep from flags")
    p_sweep.add_argument("--sweep", required=True,
                         choices=[s.value for s in Sweep])
    _add_overrides(p_sweep)

    p_beam = sub.add_parser("beampattern", help="emit beampattern CSVs")
    _add_overrides(p_beam)

    p_rt = sub.add_parser("runtime", help="measure optimization wall time vs tag count")
    _add_overrides(p_rt)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        mapping: dict[str, str] = {}
        if args.command == "run":
            mapping.update(parse_config_file(args.config))
        mapping.update(_collect_overrides(args))
        if args.command == "sweep":
            mapping["sweep"] = args.sweep
        elif args.command == "beampattern":
            mapping["sweep"] = Sweep.BEAMPATTERN.value
        elif args.command == "runtime":
            mapping["sweep"] = Sweep.RUNTIME.value
            mapping.setdefault("sweep_values", "1,4,8")
        config = config_from_mapping(mapping)
        if args.full_scale:
            config = config.full_scale()
    except (ConfigError, OSError) as exc:
        print(f"isabc: configuration error: {exc}", file=sys.stderr)
        return 1

    if args.command == "runtime":
        measure_runtime(config)
        return 0
    return run_experiment(config)


if __name__ == "__main__":
    sys.exit(main())
