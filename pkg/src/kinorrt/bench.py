"""Benchmark runner: convergence records, paired comparisons, CSV output."""

import csv
from dataclasses import dataclass
import io
import math
import time

import numpy as np

from .planner import Planner, best_solution, tree_violations

__all__ = [
    "CSV_HEADER",
    "COMPARE_HEADER",
    "ConvergenceRecord",
    "RunResult",
    "run",
    "run_trials",
    "compare_records",
    "compare",
    "milestone_times",
    "write_records",
    "read_records",
    "write_table",
    "format_records",
    "check_records",
]

CSV_HEADER = ("mode", "seed", "iteration", "nodes", "elapsed_s", "best_cost")
COMPARE_HEADER = ("mode", "axis", "x", "runs", "q25", "median", "q75")
AXES = ("nodes", "elapsed_s")


@dataclass(frozen=True)
class ConvergenceRecord:
    mode: str
    seed: int
    iteration: int
    nodes: int
    elapsed_s: float
    best_cost: float = None  # None until the first goal-reaching node

    def row(self):
        best = "" if self.best_cost is None else repr(self.best_cost)
        return [self.mode, str(self.seed), str(self.iteration), str(self.nodes),
                repr(self.elapsed_s), best]


@dataclass
class RunResult:
    """Outcome of one (mode, seed) trial."""

    mode: str
    seed: int
    records: list
    nodes: int
    best_cost: float  # math.inf when no solution
    first_solution_cost: float  # math.inf when no solution
    solution: object  # (edge chain, cost) or None
    planner: Planner
    violations: list

    @property
    def solved(self):
        return self.solution is not None


def _penalty_for(scenario, mode):
    # the terminal penalty shapes the PFF free block; fixed-state steering has none
    return scenario.penalty if mode.startswith("kino") else None


def run(scenario, mode, seed, iterations=None, out=None, clock=time.perf_counter,
        check_invariants=False, check_edges=False):
    """Plan once and return a :class:`RunResult`.

    Records are written to the text stream ``out`` (CSV rows, no header) as
    they are produced. With ``check_invariants`` the tree invariants and
    best-cost monotonicity are checked at every checkpoint (every 100
    iterations and the last one) and violations collected in the result;
    ``check_edges`` also evaluates and collision-checks each edge once.
    """
    overrides = {} if iterations is None else {"iterations": int(iterations)}
    cfg = scenario.config_for(mode, seed, **overrides)
    planner = Planner(scenario.system, scenario.environment, cfg, scenario.start,
                      penalty=_penalty_for(scenario, mode), clock=clock)
    records = []
    writer = None if out is None else csv.writer(out, lineterminator="\n")
    violations = []
    checked = {}
    last_best = [math.inf]

    def on_record(point):
        best = None if math.isinf(point.best_cost) else point.best_cost
        rec = ConvergenceRecord(mode, int(seed), point.iteration, point.nodes,
                                point.elapsed_s, best)
        records.append(rec)
        if writer is not None:
            writer.writerow(rec.row())
            out.flush()

    def on_checkpoint(p):
        actual = p.current_best()
        if actual > last_best[0]:
            violations.append(f"iteration {p.iteration}: best cost increased")
        if actual != p.best_cost and abs(actual - p.best_cost) > 1e-9 * max(1.0, abs(actual)):
            violations.append(f"iteration {p.iteration}: logged best {p.best_cost} != tree best {actual}")
        last_best[0] = actual
        for problem in tree_violations(
                p.tree, evaluate=check_edges, checked=checked,
                env=p.env if check_edges else None, delta=p.cfg.collision_delta):
            violations.append(f"iteration {p.iteration}: {problem}")

    planner.run(callback=on_checkpoint if check_invariants else None, on_record=on_record)
    solution = best_solution(planner.tree, scenario.environment)
    first = planner.first_solution if planner.first_solution is not None else math.inf
    return RunResult(mode, int(seed), records, len(planner.tree), planner.best_cost, first,
                     solution, planner, violations)


def run_trials(scenario, modes=None, seeds=None, iterations=None, **kwargs):
    """Run every (mode, seed) pair sequentially; returns results in that order."""
    modes = scenario.modes if modes is None else tuple(modes)
    seeds = scenario.seeds if seeds is None else tuple(seeds)
    return [run(scenario, m, s, iterations=iterations, **kwargs) for m in modes for s in seeds]


def _quantile(sorted_vals, q):
    """Linear-interpolation quantile that treats ``inf`` (unsolved) as a value."""
    pos = q * (len(sorted_vals) - 1)
    lo = int(math.floor(pos))
    hi = int(math.ceil(pos))
    a, b = sorted_vals[lo], sorted_vals[hi]
    if lo == hi or a == b:
        return a
    if math.isinf(b):
        return math.inf
    return a + (b - a) * (pos - lo)


def _step_value(xs, ys, x):
    """Best cost of a run at axis value ``x`` (last record with xs <= x)."""
    k = int(np.searchsorted(xs, x, side="right")) - 1
    return math.inf if k < 0 else ys[k]


def compare_records(records):
    """Aggregate records into per-mode quartile curves.

    For each mode and each axis (node count, elapsed time) the grid is the
    sorted union of the axis values recorded by that mode's runs; each run's
    best cost is carried forward to every grid point. Returns rows
    ``(mode, axis, x, runs, q25, median, q75)`` with ``inf`` for
    "no solution yet".
    """
    runs = {}
    for rec in records:
        runs.setdefault(rec.mode, {}).setdefault(rec.seed, []).append(rec)
    rows = []
    for mode in runs:
        per_seed = [sorted(rs, key=lambda r: r.iteration) for _, rs in sorted(runs[mode].items())]
        for axis in AXES:
            series = []
            for rs in per_seed:
                xs = np.array([getattr(r, axis) for r in rs], dtype=float)
                ys = [math.inf if r.best_cost is None else r.best_cost for r in rs]
                series.append((xs, ys))
            grid = sorted({float(x) for xs, _ in series for x in xs})
            for x in grid:
                vals = sorted(_step_value(xs, ys, x) for xs, ys in series)
                rows.append((mode, axis, x, len(vals), _quantile(vals, 0.25),
                             _quantile(vals, 0.5), _quantile(vals, 0.75)))
    return rows


def compare(scenario, modes, seeds, iterations=None, **kwargs):
    """Run all trials and aggregate; returns ``(table rows, run results)``."""
    results = run_trials(scenario, modes, seeds, iterations=iterations, **kwargs)
    records = [rec for res in results for rec in res.records]
    return compare_records(records), results


def milestone_times(records, milestones):
    """Elapsed time at which a run first logged at least each node count (``inf`` if never)."""
    recs = sorted(records, key=lambda r: r.iteration)
    out = []
    for m in milestones:
        hit = next((r.elapsed_s for r in recs if r.nodes >= m), math.inf)
        out.append(hit)
    return out


def check_records(records):
    """ConvergenceRecord invariants per (mode, seed); returns a list of problems."""
    problems = []
    groups = {}
    for rec in records:
        groups.setdefault((rec.mode, rec.seed), []).append(rec)
    for key, rs in groups.items():
        for a, b in zip(rs, rs[1:]):
            if not b.iteration > a.iteration:
                problems.append(f"{key}: iteration not increasing at {b.iteration}")
            ca = math.inf if a.best_cost is None else a.best_cost
            cb = math.inf if b.best_cost is None else b.best_cost
            if cb > ca:
                problems.append(f"{key}: best cost increased at iteration {b.iteration}")
    return problems


def write_records(records, fh, header=True):
    writer = csv.writer(fh, lineterminator="\n")
    if header:
        writer.writerow(CSV_HEADER)
    for rec in records:
        writer.writerow(rec.row())


def format_records(records):
    buf = io.StringIO()
    write_records(records, buf)
    return buf.getvalue()


def read_records(fh):
    reader = csv.reader(fh)
    header = next(reader)
    if tuple(header) != CSV_HEADER:
        raise ValueError(f"unexpected header {header}")
    out = []
    for row in reader:
        mode, seed, it, nodes, elapsed, best = row
        out.append(ConvergenceRecord(mode, int(seed), int(it), int(nodes), float(elapsed),
                                     None if best == "" else float(best)))
    return out


def write_table(rows, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(COMPARE_HEADER)
    for mode, axis, x, n, q25, med, q75 in rows:
        writer.writerow([mode, axis, repr(x), n] + ["" if math.isinf(v) else repr(v)
                                                   for v in (q25, med, q75)])
