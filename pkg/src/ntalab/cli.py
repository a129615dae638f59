"""Command-line entry point: ``ntalab <experiment> [flags]`` and ``ntalab suite``.

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 config error, 3 numeric error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .config import EXPERIMENTS, ConfigError, config_from_dict
from .report import SCHEMA, jsonable

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _common(p):
    p.add_argument("--config", metavar="PATH", help="TOML experiment config")
    p.add_argument("--seed", type=int, help="base seed (overrides the config)")
    p.add_argument("--threads", type=int, help="worker threads for parallel kernels")
    p.add_argument("--out", metavar="DIR", help="output directory (default: the config's output, else reports)")
    p.add_argument("--walks", type=int, help="walks per estimate")
    p.add_argument("--eps-shell", type=float, help="absorption distance")
    p.add_argument("--max-steps", type=int, help="walk truncation length")


def build_parser():
    parser = argparse.ArgumentParser(prog="ntalab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        _common(p)
        p.add_argument("--domain", help="domain kind (overrides the config)")
    p = sub.add_parser("suite", help="run the acceptance battery")
    _common(p)
    return parser


def _walk_overrides(args):
    out = {}
    if args.walks is not None:
        out["walks"] = args.walks
    if args.eps_shell is not None:
        out["eps_shell"] = args.eps_shell
    if args.max_steps is not None:
        out["max_steps"] = args.max_steps
    return out


def _load(args, experiment):
    data = {}
    if args.config:
        try:
            import tomllib
        except ModuleNotFoundError:  # pragma: no cover
            import tomli as tomllib
        try:
            data = tomllib.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError([f"cannot read config: {exc}"]) from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([f"malformed TOML: {exc}"]) from None
    if data.get("experiment", experiment) != experiment:
        raise ConfigError([f"config is for {data['experiment']!r}, not {experiment!r}"])
    data["experiment"] = experiment
    if args.seed is not None:
        data["seed"] = args.seed
    if args.threads is not None:
        data["threads"] = args.threads
    if getattr(args, "domain", None):
        data["domain"] = args.domain
    walk = dict(data.get("walk", {}))
    walk.update(_walk_overrides(args))
    if walk:
        data["walk"] = walk
    return config_from_dict(data)


def _print_verdicts(rec, stream):
    for v in rec.verdicts:
        status = "PASS" if v.passed else "FAIL"
        print(f"{status} {rec.name}.{v.name}: {v.value:.6g} {v.comparison} {v.tolerance:.6g}", file=stream)


def _run_one(cfg, out_dir, name=None, stream=None):
    from .experiments import run_experiment

    stream = stream or sys.stdout
    try:
        rec = run_experiment(cfg, out_dir, name)
    except Exception as exc:  # surfaced with the failing operation named
        print(f"error in {cfg.experiment}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return None
    path = rec.write(out_dir)
    _print_verdicts(rec, stream)
    print(f"report: {path}", file=stream)
    return rec


def run_suite(args, stream=None):
    from .experiments import suite_configs

    stream = stream or sys.stdout
    try:
        configs = suite_configs(seed=args.seed or 0, threads=args.threads, walk=_walk_overrides(args))
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out or "reports")
    summary, code = [], EXIT_OK
    t = time.perf_counter()
    timing = {}
    for name, cfg in configs:
        rec = _run_one(cfg, out_dir, name, stream)
        if rec is None:
            summary.append({"id": name, "pass": False, "error": True})
            code = EXIT_NUMERIC
            continue
        timing[name] = round(rec.wall_time, 3)
        summary.append({"id": name, "pass": rec.passed,
                        "verdicts": {v.name: v.passed for v in rec.verdicts}})
        if not rec.passed and code == EXIT_OK:
            code = EXIT_FAIL
    out_dir.mkdir(parents=True, exist_ok=True)
    body = {"schema": SCHEMA, "suite": summary, "pass": all(s["pass"] for s in summary),
            "seed": args.seed or 0, "threads": args.threads}
    (out_dir / "suite.json").write_text(json.dumps(jsonable(body), indent=2, sort_keys=True) + "\n")
    timing["total"] = round(time.perf_counter() - t, 3)
    (out_dir / "suite.timing.json").write_text(json.dumps(timing, indent=2, sort_keys=True) + "\n")
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "suite":
        return run_suite(args)
    try:
        cfg = _load(args, args.command)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    rec = _run_one(cfg, Path(args.out or cfg.output or "reports"))
    if rec is None:
        return EXIT_NUMERIC
    return EXIT_OK if rec.passed else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
