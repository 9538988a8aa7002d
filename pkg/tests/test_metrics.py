import pytest
from hypothesis import given, strategies as st

from wdmsim.metrics import (
    CSV_COLUMNS, EmptyResults, Metrics, Obs, Observation, Summary, emit_table, read_csv,
    record, to_csv,
)


def test_record_delivery():
    m = record(Metrics(), Observation(Obs.DELIVERED, 5, 1))
    assert m.delivered_flits == 1


def test_discard_balances():
    m = Metrics()
    record(m, Observation(Obs.INJECTED, 0, 1, 100))
    record(m, Observation(Obs.DISCARDED, 3, 1, 100))
    assert m.conserved() and m.discarded_requests == 1


def test_zero_observations():
    m = Metrics()
    assert m.makespan == 0 and m.injected_flits == m.delivered_flits == 0 and m.conserved()


def test_makespan_and_latency():
    m = Metrics()
    record(m, Observation(Obs.INJECTED, 100, 4, 2))
    record(m, Observation(Obs.DELIVERED, 300, 4))
    record(m, Observation(Obs.DELIVERED, 450, 4, complete=True))
    assert m.makespan == 3.5 and m.per_request_latency == {4: 3.5}


def metrics(ms, seed=0):
    m = Metrics(seed=seed)
    record(m, Observation(Obs.INJECTED, 0, 0))
    record(m, Observation(Obs.DELIVERED, int(ms * 100), 0, complete=True))
    return m


def sweep():
    results = {}
    for W, c in [(4, 1), (16, 4), (64, 16)]:
        for p in (1, 4, 8, 16):
            results[(W, c, p, "baseline")] = metrics(1000 / p)
            results[(W, c, p, "proposed-connection")] = metrics(100 / p)
    return results


def test_sweep_table_shape():
    table, csv_text = emit_table(sweep())
    blocks = table.strip().split("\n\n")
    assert len(blocks) == 3
    rows = [line for b in blocks for line in b.splitlines()[3:]]
    assert len(rows) == 12
    assert blocks[0].splitlines()[0] == "Number of Wavelengths - 4, Control Wavelengths - 1"
    assert "Existing" in blocks[0].splitlines()[1].split("Proposed")[0]
    assert csv_text.splitlines()[0] == ",".join(CSV_COLUMNS)


def test_single_cell_table():
    table, _ = emit_table({(4, 1, 1, "proposed-connection"): metrics(7)})
    assert table.splitlines()[-1].split() == ["1", "7"]


def test_empty_results():
    with pytest.raises(EmptyResults):
        emit_table({})


def test_multi_seed_cell():
    table, csv_text = emit_table({(4, 1, 1, "baseline"): [metrics(10, 0), metrics(20, 1)]})
    assert "15 [10, 20]" in table
    assert len(csv_text.splitlines()) == 3


def test_csv_round_trip():
    results = sweep()
    rows = read_csv(to_csv(results))
    assert [(r["W"], r["control_wavelengths"], r["parallelism"], r["mode"]) for r in rows] == list(results)
    assert [r["makespan_us"] for r in rows] == [round(m.makespan, 2) for m in results.values()]


summaries = st.lists(st.floats(0, 1e6, allow_nan=False), min_size=1, max_size=5).map(Summary.of)


@given(summaries, summaries, summaries)
def test_merge_is_associative_and_commutative(a, b, c):
    left, right = a.merge(b).merge(c), a.merge(b.merge(c))
    assert (left.count, left.low, left.high) == (right.count, right.low, right.high)
    assert left.total == pytest.approx(right.total)
    assert a.merge(b) == b.merge(a)


@given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=2, max_size=10), st.integers(1, 9))
def test_merge_matches_whole(values, cut):
    cut = min(cut, len(values) - 1)
    whole = Summary.of(values)
    parts = Summary.of(values[:cut]).merge(Summary.of(values[cut:]))
    assert (parts.count, parts.low, parts.high) == (whole.count, whole.low, whole.high)


def test_summary_needs_values():
    with pytest.raises(EmptyResults):
        Summary.of([])
