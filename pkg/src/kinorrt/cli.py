"""Command-line interface.

Exit codes: 0 success, 1 validation failure, 2 I/O or parse error.
"""

import argparse
import math
import os
import sys

from . import bench
from ._backend import BACKEND
from .errors import InvalidScenarioError, KinoRRTError
from .oracles import format_report, validate_system
from .planner import MODES
from .scenario import BUILTIN_SCENARIOS, BUILTIN_SYSTEMS, builtin_scenario_text, load_scenario

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


class UsageError(Exception):
    pass


def parse_seeds(text):
    """``"1..10"`` (inclusive range) or a comma list such as ``"1,4,7"``."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"bad seed list {text!r}; use e.g. 1..10 or 1,2,3") from None
    if not seeds:
        raise UsageError("empty seed list")
    return seeds


def parse_modes(text):
    modes = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in modes if m not in MODES]
    if bad or not modes:
        raise UsageError(f"unknown mode(s) {bad}; choose from {', '.join(MODES)}")
    return modes


def _load(path):
    """A scenario file, or a built-in fixture by name when no such file exists."""
    if not os.path.exists(path) and path in BUILTIN_SCENARIOS:
        from .scenario import builtin_scenario
        return builtin_scenario(path)
    return load_scenario(path)


def _fmt_cost(value):
    return "none" if math.isinf(value) else f"{value:.6g}"


def cmd_plan(args):
    scenario = _load(args.scenario)
    if args.mode not in MODES:
        raise UsageError(f"unknown mode {args.mode!r}; choose from {', '.join(MODES)}")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            bench.write_records([], fh)
            result = bench.run(scenario, args.mode, args.seed, iterations=args.iterations, out=fh)
    else:
        bench.write_records([], sys.stdout)
        result = bench.run(scenario, args.mode, args.seed, iterations=args.iterations,
                           out=sys.stdout)
    print(f"mode={args.mode} seed={args.seed} nodes={result.nodes} "
          f"best_cost={_fmt_cost(result.best_cost)} "
          f"first_solution={_fmt_cost(result.first_solution_cost)}",
          file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_compare(args):
    scenario = _load(args.scenario)
    modes = parse_modes(args.modes)
    seeds = parse_seeds(args.seeds)
    rows, results = bench.compare(scenario, modes, seeds, iterations=args.iterations)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        bench.write_table(rows, fh)
    if args.records:
        with open(args.records, "w", encoding="utf-8", newline="") as fh:
            bench.write_records([r for res in results for r in res.records], fh)
    for mode in modes:
        finals = sorted(res.best_cost for res in results if res.mode == mode)
        solved = sum(not math.isinf(c) for c in finals)
        median = bench._quantile(finals, 0.5)
        print(f"{mode}: solved {solved}/{len(finals)}, median final cost {_fmt_cost(median)}")
    return EXIT_OK


def cmd_validate(args):
    if args.system not in BUILTIN_SYSTEMS:
        raise UsageError(f"unknown system {args.system!r}; choose from {', '.join(BUILTIN_SYSTEMS)}")
    checks = validate_system(args.system)
    print(f"backend: {BACKEND}")
    print(format_report(args.system, checks))
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VALIDATION


def cmd_scenario_init(args):
    text = builtin_scenario_text(args.builtin)
    if os.path.exists(args.out) and not args.force:
        raise UsageError(f"{args.out} exists; pass --force to overwrite")
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="kinorrt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="run one planner trial and emit convergence records")
    p.add_argument("scenario", help="scenario file (or built-in name)")
    p.add_argument("--mode", required=True, help=f"one of {', '.join(MODES)}")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--iterations", type=int, default=None, help="override the scenario's N")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("compare", help="run several modes and seeds, emit quartile table")
    p.add_argument("scenario")
    p.add_argument("--modes", required=True, help="comma list, e.g. kino,baseline")
    p.add_argument("--seeds", required=True, help="range 1..10 or comma list")
    p.add_argument("--out", required=True, help="comparison table CSV path")
    p.add_argument("--records", help="also write the raw convergence records here")
    p.add_argument("--iterations", type=int, default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate", help="run the steering oracle suite for a built-in system")
    p.add_argument("system", help=f"one of {', '.join(BUILTIN_SYSTEMS)}")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("scenario", help="scenario file utilities")
    ssub = p.add_subparsers(dest="scenario_command", required=True)
    q = ssub.add_parser("init", help="write a built-in scenario to a file")
    q.add_argument("builtin", choices=BUILTIN_SCENARIOS)
    q.add_argument("--out", required=True)
    q.add_argument("--force", action="store_true")
    q.set_defaults(func=cmd_scenario_init)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, InvalidScenarioError, OSError, KinoRRTError) as exc:
        print(f"kinorrt: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
