"""Command-line entry point.

Exit codes: 0 pass, 1 invalid config, 2 a numerical criterion failed,
3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback

from .config import KINDS, ConfigError, ExperimentConfig, minimal_config, validate
from .experiments import run

EXIT_PASS, EXIT_INVALID, EXIT_FAIL, EXIT_INTERNAL = 0, 1, 2, 3


def _tolerance(text: str):
    key, sep, val = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key.strip(), float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance {key!r} needs a number, got {val!r}") from None


def _int_list(text: str) -> list:
    try:
        return [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _direction(text: str) -> str:
    aliases = {"+": "+", "plus": "+", "-": "-", "minus": "-"}
    if text not in aliases:
        raise argparse.ArgumentTypeError("direction must be + or -")
    return aliases[text]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lrwalk", description="Long-range quantum walk experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in KINDS + ("validate",):
        p = sub.add_parser(name, help=f"run a {name} experiment" if name != "validate" else "check a config")
        p.add_argument("--config", help="JSON config file (defaults to a Hadamard walk)")
        if name == "validate":
            continue
        p.add_argument("--out", help="output directory (default: config output_dir or ./runs)")
        p.add_argument("--kgrid", type=int, help="momentum grid size")
        p.add_argument("--threads", type=int, help="worker processes for sweeps")
        p.add_argument("--tolerance", type=_tolerance, action="append", default=[], metavar="KEY=VALUE",
                       help="override a tolerance, repeatable")
        p.add_argument("--T", dest="T", type=int, help="final time")
        p.add_argument("--checkpoints", type=_int_list, help="comma-separated checkpoint times")
        p.add_argument("--direction", type=_direction, help="wave-operator direction, + or -")
    return parser


def _load(path, kind):
    if path is None:
        return minimal_config(kind if kind != "validate" else "evolve")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _apply_overrides(raw: dict, args) -> dict:
    raw = dict(raw)
    raw["experiment"] = args.command
    params = dict(raw.get("params", {}))
    kind = args.command
    target = params
    if kind == "sweep":
        target = dict(params.get("base_params", {}))
        kind = params.get("base", "waveop")
    if args.kgrid is not None:
        target["kgrid"] = args.kgrid
    if args.checkpoints is not None:
        target["checkpoints"] = args.checkpoints
    if args.direction is not None:
        target["direction"] = args.direction
    if args.T is not None:
        if kind == "evolve":
            target["T"] = args.T
        elif kind == "waveop" and args.checkpoints is None:
            target["checkpoints"] = sorted({max(1, args.T >> s) for s in range(4, -1, -1)})
        elif kind == "weaklimit":
            target["T_list"] = sorted({max(1, args.T >> s) for s in range(3, -1, -1)})
    if args.command == "sweep":
        if target:
            params["base_params"] = target
    if params:
        raw["params"] = params
    if args.tolerance:
        tols = dict(raw.get("tolerances", {}))
        tols.update(dict(args.tolerance))
        raw["tolerances"] = tols
    if args.threads is not None:
        raw["threads"] = args.threads
    return raw


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        raw = _load(args.config, args.command)
    except (OSError, json.JSONDecodeError) as e:
        print(f"invalid config: {e}", file=sys.stderr)
        return EXIT_INVALID

    if args.command == "validate":
        diags = validate(raw)
        for d in diags:
            print(f"error: {d}")
        if not diags:
            print("config is valid")
        return EXIT_INVALID if diags else EXIT_PASS

    raw = _apply_overrides(raw, args)
    try:
        cfg = ExperimentConfig.from_dict(raw)
    except ConfigError as e:
        for d in e.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return EXIT_INVALID

    try:
        result = run(cfg, args.out)
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL

    for key, val in sorted(result.report.get("metrics", {}).items()):
        print(f"{key}={val}")
    print(f"report={result.run_dir / 'report.json'}")
    print("PASS" if result.passed else "FAIL")
    return EXIT_PASS if result.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
