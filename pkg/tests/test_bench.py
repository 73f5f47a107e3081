import io
import itertools
import math

import pytest

from kinorrt.bench import (
    CSV_HEADER,
    ConvergenceRecord,
    _quantile,
    check_records,
    compare,
    compare_records,
    format_records,
    milestone_times,
    read_records,
    run,
    write_records,
    write_table,
)
from kinorrt.scenario import builtin_scenario


def counter_clock():
    ticks = itertools.count()
    return lambda: next(ticks) * 1e-3


@pytest.fixture(scope="module")
def di():
    return builtin_scenario("double_integrator")


def test_double_integrator_kino_solves_in_400(di):
    res = run(di, "kino", 1, iterations=400)
    assert res.solved
    chain, cost = res.solution
    assert cost == res.best_cost and math.isfinite(cost)
    assert res.first_solution_cost >= res.best_cost


def test_record_stream_is_reproducible(di):
    streams = []
    for _ in range(2):
        buf = io.StringIO()
        run(di, "kino", 2, iterations=150, out=buf, clock=counter_clock())
        streams.append(buf.getvalue())
    assert streams[0] == streams[1] and streams[0]


def test_zero_iterations(di):
    buf = io.StringIO()
    res = run(di, "baseline", 1, iterations=0, out=buf)
    assert buf.getvalue() == "" and res.records == [] and res.nodes == 1
    assert not res.solved and math.isinf(res.best_cost)


def test_streamed_rows_match_records(di):
    buf = io.StringIO()
    res = run(di, "kino", 1, iterations=120, out=buf)
    buf.seek(0)
    text = ",".join(CSV_HEADER) + "\n" + buf.getvalue()
    assert read_records(io.StringIO(text)) == res.records


def test_run_checks_invariants(di):
    res = run(di, "kino_delayed", 3, iterations=200, check_invariants=True, check_edges=True)
    assert res.violations == []
    assert check_records(res.records) == []


# -- records -------------------------------------------------------------------

def test_record_row_format():
    assert ConvergenceRecord("kino", 1, 5, 3, 0.25).row() == ["kino", "1", "5", "3", "0.25", ""]
    assert ConvergenceRecord("kino", 1, 5, 3, 0.25, 12.5).row()[-1] == "12.5"


def test_records_round_trip():
    recs = [ConvergenceRecord("kino", 1, 1, 2, 0.1), ConvergenceRecord("kino", 1, 2, 3, 0.2, 9.0)]
    text = format_records(recs)
    assert text.splitlines()[0] == "mode,seed,iteration,nodes,elapsed_s,best_cost"
    assert read_records(io.StringIO(text)) == recs


def test_read_records_rejects_bad_header():
    with pytest.raises(ValueError):
        read_records(io.StringIO("a,b\n"))


def test_check_records_flags_problems():
    bad = [ConvergenceRecord("kino", 1, 2, 2, 0.1, 5.0), ConvergenceRecord("kino", 1, 2, 3, 0.2, 6.0)]
    problems = check_records(bad)
    assert any("iteration" in p for p in problems) and any("increased" in p for p in problems)


# -- aggregation ----------------------------------------------------------------------

def test_quantile_with_unsolved_runs():
    assert _quantile([1.0, 2.0, 3.0, 4.0], 0.5) == 2.5
    assert _quantile([1.0, 2.0, math.inf], 0.5) == 2.0
    assert _quantile([1.0, math.inf], 0.5) == math.inf
    assert _quantile([math.inf, math.inf], 0.25) == math.inf


def test_single_run_table_is_the_record_stream(di):
    res = run(di, "kino", 4, iterations=150)
    rows = compare_records(res.records)
    by_nodes = [r for r in rows if r[1] == "nodes"]
    assert len(by_nodes) == len({r.nodes for r in res.records})
    for row in by_nodes:
        last = [r for r in res.records if r.nodes <= row[2]][-1]
        expected = math.inf if last.best_cost is None else last.best_cost
        assert row[3] == 1 and row[4] == row[5] == row[6] == expected


def test_compare_is_pure_function_of_records(di):
    rows, results = compare(di, ["kino", "baseline"], [1, 2], iterations=100)
    records = [r for res in results for r in res.records]
    text = format_records(records)
    assert compare_records(read_records(io.StringIO(text))) == rows
    assert {r[0] for r in rows} == {"kino", "baseline"}
    assert all(r[3] == 2 for r in rows)
    buf = io.StringIO()
    write_table(rows, buf)
    assert buf.getvalue().splitlines()[0] == "mode,axis,x,runs,q25,median,q75"


def test_compare_medians_are_step_values():
    recs = [
        ConvergenceRecord("m", 1, 1, 10, 1.0, None),
        ConvergenceRecord("m", 1, 2, 20, 2.0, 8.0),
        ConvergenceRecord("m", 2, 1, 15, 1.5, 6.0),
        ConvergenceRecord("m", 2, 2, 25, 3.0, 4.0),
    ]
    rows = {(r[1], r[2]): r for r in compare_records(recs)}
    assert rows[("nodes", 10.0)][5] == math.inf  # run 2 has no record yet
    assert rows[("nodes", 20.0)][5] == 7.0  # 8 and 6
    assert rows[("nodes", 25.0)][5] == 6.0  # 8 and 4
    assert rows[("elapsed_s", 1.5)][4:] == (math.inf, math.inf, math.inf)


def test_milestone_times():
    recs = [ConvergenceRecord("m", 1, i, n, t) for i, (n, t) in enumerate([(50, 1.0), (100, 2.0), (180, 3.0)], 1)]
    assert milestone_times(recs, [100, 150, 200]) == [2.0, 3.0, math.inf]
