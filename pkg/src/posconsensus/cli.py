"""Command-line entry point.

Exit codes: 0 pass, 2 validation or assumption failure, 3 invariant violation
detected during simulation, 1 any other error.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from .scenario import MODES, AssumptionError, check_scenario, complete_gains
from .scenario_file import (
    ScenarioFileError,
    ScenarioValidationError,
    loads_scenario,
    reference_example_text,
)
from .sim import run_scenario
from .output import write_run
from .systems import ModelError, SynthesisInfeasible

EXIT_OK, EXIT_ERROR, EXIT_INVALID, EXIT_INVARIANT = 0, 1, 2, 3

log = logging.getLogger("posconsensus")


def _read(path) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_for_check(text: str, mode: str | None = None):
    """Load without validation; fall back to no synthesis if synthesis cannot run."""
    try:
        s = loads_scenario(text, validate=False, synthesize=True)
    except (SynthesisInfeasible, ModelError) as exc:
        log.warning("gain synthesis skipped: %s", exc)
        s = loads_scenario(text, validate=False, synthesize=False)
    if mode:
        s.mode = mode
    return s


def cmd_check(path, mode: str | None = None, out=None) -> int:
    out = out or sys.stdout
    s = _load_for_check(_read(path), mode)
    report = check_scenario(s)
    print(report.format(), file=out)
    print("RESULT: " + ("PASS" if report.ok else "FAIL"), file=out)
    return EXIT_OK if report.ok else EXIT_INVALID


def _run_one(text: str, out_dir, mode=None, horizon=None, seed=None, override=False, out=None) -> int:
    out = out or sys.stdout
    if override:
        s = _load_for_check(text, mode)
        if seed is not None:
            s = _reseed(text, s, seed, mode)
    else:
        s = loads_scenario(text, seed=seed, validate=False)
        if mode:
            s.mode = mode
            complete_gains(s)
        report = check_scenario(s)
        if not report.ok:
            raise AssumptionError(report)
    if horizon is not None:
        s.horizon = int(horizon)
    trace = run_scenario(s, override=override)
    summary = write_run(trace, out_dir)
    pos, conv = summary["positivity"], summary["convergence"]
    print(f"[{s.mode}] wrote {out_dir}: positivity {'PASS' if pos['pass'] else 'FAIL'} "
          f"(min entry {pos['min_state_entry']:.3g}), convergence "
          f"{'PASS' if conv['pass'] else 'FAIL'} (first step {conv['first_step']}, "
          f"tail error {conv['tail_error']:.3g})"
          + (" [outside the positivity and convergence guarantees]" if trace.outside_hypotheses else ""), file=out)
    return EXIT_OK if pos["pass"] else EXIT_INVARIANT


def _reseed(text, s, seed, mode):
    fresh = loads_scenario(text, seed=seed, validate=False, synthesize=False)
    return dataclasses.replace(s, x0=fresh.x0, x_init=fresh.x_init)


def cmd_run(path, out_dir, mode=None, horizon=None, seed=None, override=False, out=None) -> int:
    return _run_one(_read(path), out_dir, mode, horizon, seed, override, out)


def cmd_synthesize(path, out_path, out=None) -> int:
    """Write a copy of the scenario file with every gain filled in and verified."""
    out = out or sys.stdout
    text = _read(path)
    s = loads_scenario(text, validate=False, synthesize=False)
    try:
        complete_gains(s)
    except (SynthesisInfeasible, ModelError) as exc:
        print(f"synthesis failed: {exc}", file=out)
        return EXIT_INVALID
    report = check_scenario(s)
    print(report.format(), file=out)
    if not report.ok:
        print("RESULT: FAIL (file not written)", file=out)
        return EXIT_INVALID
    raw = yaml.safe_load(text)
    for entry, g in zip(raw["agents"], s.gains.agents):
        for k in ("K1", "K2", "K3"):
            val = getattr(g, k)
            if val is not None:
                entry[k] = np.asarray(val, dtype=float).tolist()
    Path(out_path).write_text(yaml.safe_dump(raw, sort_keys=False, default_flow_style=None),
                              encoding="utf-8")
    print(f"RESULT: PASS, wrote {out_path}", file=out)
    return EXIT_OK


def cmd_reference_example(out_dir, out=None) -> int:
    """Run the bundled example in all three modes, one subdirectory each."""
    out = out or sys.stdout
    text = reference_example_text()
    codes = []
    for mode in ("observer", "state", "output"):
        codes.append(_run_one(text, Path(out_dir) / mode, mode=mode, out=out))
    return max(codes)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="posconsensus", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="run assumption and gain checks without simulating")
    p.add_argument("file")
    p.add_argument("--mode", choices=MODES)

    p = sub.add_parser("run", help="simulate a scenario and write trace/summary files")
    p.add_argument("file")
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--horizon", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--override-assumptions", action="store_true")

    p = sub.add_parser("synthesize", help="fill in missing gains and write a new scenario file")
    p.add_argument("file")
    p.add_argument("--out", required=True)

    p = sub.add_parser("paper-example", help="run the bundled example in all three modes")
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "check":
            return cmd_check(args.file, args.mode)
        if args.command == "run":
            return cmd_run(args.file, args.out, args.mode, args.horizon, args.seed,
                           args.override_assumptions)
        if args.command == "synthesize":
            return cmd_synthesize(args.file, args.out)
        return cmd_reference_example(args.out)
    except (ScenarioFileError, ScenarioValidationError, AssumptionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled error", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
