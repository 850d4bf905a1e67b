"""Command-line driver for the preset experiments.

Every subcommand loads an optional YAML config, applies the common
overrides (seed, profile, output directory), runs one preset and prints
its report as JSON on stdout.  Failures exit nonzero with a one-line
JSON error object on stderr, so callers can script against the tool.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import experiments as exp


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="echoflow",
        description="Acoustic inverse-source flow measurement experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, help="YAML experiment config")
        p.add_argument("--seed", type=int, help="override the RNG seed")
        p.add_argument("--out", type=Path, help="artifact output directory")
        p.add_argument(
            "--profile",
            choices=sorted(exp.PROFILES),
            help="grid/receiver preset (default desk)",
        )

    p1 = sub.add_parser("example1", help="single-frame reconstruction at one frequency")
    p1.add_argument("--q0", type=float, required=True, help="pulse frequency in Hz")
    common(p1)

    p2 = sub.add_parser("example2", help="receiver-coverage comparison")
    p2.add_argument("--layout", choices=exp.LAYOUT_CHOICES, required=True)
    common(p2)

    p3 = sub.add_parser("example3", help="reconstruction from noisy data")
    p3.add_argument("--sigma", type=float, required=True, help="relative noise level")
    common(p3)

    pv = sub.add_parser("vortex", help="cellular-vortex velocimetry run")
    common(pv)

    pk = sub.add_parser("karman", help="imported vortex-street run")
    pk.add_argument("--field", type=Path, required=True, help="velocity field file")
    common(pk)

    pc = sub.add_parser("vadcp-compare", help="profiler vs inverse method comparison")
    pc.add_argument("--field", type=Path, required=True, help="velocity field file")
    common(pc)

    return parser


def load_config(args: argparse.Namespace) -> exp.ExperimentConfig:
    if args.config is not None:
        config = exp.ExperimentConfig.from_yaml(args.config)
    else:
        config = exp.ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.profile is not None:
        overrides["profile"] = args.profile
    if args.out is not None:
        overrides["out_dir"] = str(args.out)
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config


def run_command(args: argparse.Namespace) -> dict:
    config = load_config(args)
    out_dir = Path(config.out_dir) if config.out_dir else None
    if args.command == "example1":
        report = exp.run_example1(config, q0=args.q0, out_dir=out_dir)
    elif args.command == "example2":
        report = exp.run_example2(config, args.layout, out_dir=out_dir)
    elif args.command == "example3":
        report = exp.run_example3(config, args.sigma, out_dir=out_dir)
    elif args.command == "vortex":
        report = exp.run_vortex(config, out_dir=out_dir)
    elif args.command == "karman":
        report = exp.run_karman(config, field_path=args.field, out_dir=out_dir)
    elif args.command == "vadcp-compare":
        report = exp.run_vadcp_compare(config, args.field, out_dir=out_dir)
    else:  # pragma: no cover - argparse enforces the choices
        raise ValueError(f"unknown command {args.command!r}")
    if out_dir is not None:
        exp.emit_artifacts(report, out_dir)
    return report


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        report = run_command(args)
    except (ValueError, FileNotFoundError, RuntimeError) as err:
        payload = {"error": type(err).__name__, "message": str(err)}
        print(json.dumps(payload), file=sys.stderr)
        return 1
    shown = {k: v for k, v in report.items() if k != "files"}
    print(json.dumps(shown, indent=2, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
