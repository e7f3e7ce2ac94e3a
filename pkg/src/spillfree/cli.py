"""Command-line interface.

Subcommands:
    simulate <config>                 certify (if requested), run, verify
    gains check <config>              evaluate the configured certificate
    gains suggest <config>            print a suggested gain set + radius
    verify <config>                   run the configured checks, simulating
                                      only when a check needs a trajectory
    sweep <config> --param a.b --values v1,v2,...   batch over one parameter

Common flags: --out DIR, --seed N, --jobs N, --strict.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ConfigError, config_from_dict, load_config
from .controller import InfeasibleTargetError, check_theorem1, check_theorem2, suggest_gains
from .core import InvariantError
from .experiment import EXIT_CHECKS, EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, run

__all__ = ["main"]


def _load(path: str, seed: int | None):
    cfg = load_config(path)
    if seed is not None:
        cfg.verify.seed = seed
    return cfg


def _cmd_simulate(args) -> int:
    cfg = _load(args.config, args.seed)
    result = run(cfg, out_dir=Path(args.out) if args.out else None, strict=args.strict)
    for msg in result.messages:
        print(msg, file=sys.stderr)
    if result.trajectory is not None:
        print(f"simulated {len(result.trajectory.times)} samples, "
              f"termination: {result.trajectory.termination}")
    return result.exit_code


def _cmd_verify(args) -> int:
    cfg = _load(args.config, args.seed)
    result = run(
        cfg, out_dir=Path(args.out) if args.out else None, strict=args.strict, do_simulate=False
    )
    for check in result.verifications:
        verdict = {True: "pass", False: "FAIL", None: "observational"}[check.passed]
        print(f"{check.name}: {verdict} (worst margin {check.worst_margin:.3g})")
    for msg in result.messages:
        print(msg, file=sys.stderr)
    return result.exit_code


def _cmd_gains(args) -> int:
    cfg = _load(args.config, args.seed)
    gs = cfg.gains
    if gs.theorem is None:
        print("no certificate requested in [gains]", file=sys.stderr)
        return EXIT_CONFIG
    if args.action == "suggest":
        try:
            suggestion = suggest_gains(
                cfg.friction,
                cfg.physical,
                mode=gs.theorem,
                omega=gs.omega,
                omega1=gs.omega1,
                omega2=gs.omega2,
                sigma=gs.sigma,
                q=gs.q,
                margin=gs.margin,
            )
        except InfeasibleTargetError as exc:
            print(f"infeasible: {exc}", file=sys.stderr)
            return EXIT_CHECKS
        payload = suggestion.report.to_json_dict()
        print(json.dumps(payload, indent=2))
        return EXIT_OK
    # action == "check"
    if gs.explicit is None or gs.r is None:
        print("gains check needs explicit gains and a radius r", file=sys.stderr)
        return EXIT_CONFIG
    if gs.theorem == "theorem1":
        report = check_theorem1(gs.explicit, gs.omega, gs.r, cfg.friction, cfg.physical)
    else:
        report = check_theorem2(gs.explicit, gs.omega1, gs.omega2, gs.r, cfg.friction, cfg.physical)
    print(json.dumps(report.to_json_dict(), indent=2))
    return EXIT_OK if report.passed else EXIT_CHECKS


def _set_path(data: dict, dotted: str, value):
    keys = dotted.split(".")
    node = data
    for key in keys[:-1]:
        node = node.setdefault(key, {})
    node[keys[-1]] = value


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _sweep_one(payload) -> tuple[str, int]:
    data, out_dir, strict = payload
    try:
        cfg = config_from_dict(data)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return out_dir, EXIT_CONFIG
    result = run(cfg, out_dir=Path(out_dir), strict=strict)
    return out_dir, result.exit_code


def _cmd_sweep(args) -> int:
    cfg = _load(args.config, args.seed)  # validates the base file
    base = cfg.raw
    values = [_parse_value(v) for v in args.values.split(",")]
    out_root = Path(args.out) if args.out else cfg.out_dir
    jobs = []
    for i, value in enumerate(values):
        data = copy.deepcopy(base)
        _set_path(data, args.param, value)
        jobs.append((data, str(out_root / f"run_{i:03d}"), args.strict))
    codes: dict[str, int] = {}
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for out_dir, code in pool.map(_sweep_one, jobs):
                codes[out_dir] = code
    else:
        for payload in jobs:
            out_dir, code = _sweep_one(payload)
            codes[out_dir] = code
    summary = {
        "param": args.param,
        "values": values,
        "runs": [{"out": k, "exit_code": v} for k, v in codes.items()],
    }
    out_root.mkdir(parents=True, exist_ok=True)
    (out_root / "sweep_summary.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary, indent=2))
    return max(codes.values()) if codes else EXIT_OK


def main(argv: list[str] | None = None) -> int:
    # the common flags parse in either position: before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=argparse.SUPPRESS,
                        help="output directory (overrides config)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="verification seed override")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS,
                        help="parallel runs for sweep")
    common.add_argument("--strict", action="store_true", default=argparse.SUPPRESS,
                        help="treat warnings as failures")

    parser = argparse.ArgumentParser(prog="spillfree", description=__doc__, parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run the configured experiment", parents=[common])
    p_sim.add_argument("config")
    p_sim.set_defaults(func=_cmd_simulate)

    p_gains = sub.add_parser("gains", help="gain certification", parents=[common])
    p_gains.add_argument("action", choices=("check", "suggest"))
    p_gains.add_argument("config")
    p_gains.set_defaults(func=_cmd_gains)

    p_ver = sub.add_parser("verify", help="run checks (simulate only if needed)",
                           parents=[common])
    p_ver.add_argument("config")
    p_ver.set_defaults(func=_cmd_verify)

    p_sweep = sub.add_parser("sweep", help="batch over one config parameter",
                             parents=[common])
    p_sweep.add_argument("config")
    p_sweep.add_argument("--param", required=True, help="dotted path, e.g. physical.mu")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.set_defaults(func=_cmd_sweep)

    args = parser.parse_args(argv)
    args.out = getattr(args, "out", None)
    args.seed = getattr(args, "seed", None)
    args.jobs = getattr(args, "jobs", 1)
    args.strict = getattr(args, "strict", False)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
