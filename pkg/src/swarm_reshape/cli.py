"""Command line: ``swarm-reshape run | compare | verify``."""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .config import ScenarioError, SimMode, load_scenario, reference_scenario_path
from .engine import EventKind, SimulationResult, run
from .output import atomic_write, dumps, write_outputs
from .verify import SUITES, run_all

OUT_ENV = "SWARM_OUT_DIR"
# DFRPSR must beat the baseline by this share of the baseline's post-passage interval
COMPARE_MARGIN = 0.05


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swarm-reshape", description="Swarm gap-passage simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--scenario", type=Path, default=None,
                       help="scenario INI file (default: the shipped reference scenario)")
        p.add_argument("--out", type=Path, default=None,
                       help=f"output directory (default: ${OUT_ENV})")

    p_run = sub.add_parser("run", help="simulate one scenario and write result files")
    common(p_run)
    p_run.add_argument("--mode", choices=[m.value for m in SimMode], default=None,
                       help="override the scenario's mode")

    p_cmp = sub.add_parser("compare", help="run both modes and compare reformation times")
    common(p_cmp)

    p_ver = sub.add_parser("verify", help="run the built-in oracle suites")
    p_ver.add_argument("--suite", choices=sorted(SUITES), action="append", default=None,
                       help="run only this suite (repeatable)")
    return parser


def _out_dir(parser: argparse.ArgumentParser, value: Optional[Path]) -> Path:
    if value is not None:
        return value
    env = os.environ.get(OUT_ENV)
    if env:
        return Path(env)
    parser.error(f"--out is required when ${OUT_ENV} is not set")
    raise AssertionError  # parser.error exits


def comparison(dfrpsr: SimulationResult, baseline: SimulationResult) -> dict:
    d_restore = dfrpsr.first_time(EventKind.FORMATION_RESTORED)
    b_restore = baseline.first_time(EventKind.FORMATION_RESTORED)
    b_passage = baseline.first_time(EventKind.PASSAGE_COMPLETE)
    out = {
        "dfrpsr": {
            "reformation_time": d_restore,
            "passage_time": dfrpsr.first_time(EventKind.PASSAGE_COMPLETE),
            "complete": dfrpsr.complete,
        },
        "baseline": {
            "reformation_time": b_restore,
            "passage_time": b_passage,
            "complete": baseline.complete,
        },
        "difference": None,
        "baseline_reformation_interval": None,
        "required_margin": None,
        "dfrpsr_faster": False,
    }
    if d_restore is not None and b_restore is not None:
        out["difference"] = b_restore - d_restore
        if b_passage is not None:
            interval = b_restore - b_passage
            out["baseline_reformation_interval"] = interval
            out["required_margin"] = COMPARE_MARGIN * interval
            out["dfrpsr_faster"] = bool(d_restore < b_restore - COMPARE_MARGIN * interval)
        else:
            out["dfrpsr_faster"] = bool(d_restore < b_restore)
    elif d_restore is not None:
        out["dfrpsr_faster"] = True
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        out = None if args.command == "verify" else _out_dir(parser, args.out)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.command == "verify":
        results = run_all(args.suite)
        for r in results:
            print(r.line())
        return 0 if all(r.passed for r in results) else 1

    path = args.scenario or reference_scenario_path()
    try:
        config = load_scenario(path)
    except (ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command == "run":
            if args.mode is not None:
                config = replace(config, mode=SimMode(args.mode))
            result = run(config)
            write_outputs(result, out)
            status = "complete" if result.complete else "incomplete (max_time reached)"
            print(f"{config.mode.value}: {status}, {len(result.events)} events -> {out}")
            return 0

        results = {}
        for mode in SimMode:
            results[mode] = run(replace(config, mode=mode))
            write_outputs(results[mode], Path(out) / mode.value)
        report = comparison(results[SimMode.DFRPSR], results[SimMode.BASELINE])
        atomic_write(Path(out) / "comparison.json", dumps(report) + "\n")
        d, b = report["dfrpsr"]["reformation_time"], report["baseline"]["reformation_time"]
        print(f"formation restored: dfrpsr {d}, baseline {b}; dfrpsr faster: {report['dfrpsr_faster']}")
        return 0
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
