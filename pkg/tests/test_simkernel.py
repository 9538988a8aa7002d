from dataclasses import replace

import pytest

from wdmsim.rwa import LinkState
from wdmsim.simkernel import (
    EventKind, EventQueue, Mode, SimConfig, Simulation, Start, TimeTravel, channel_lanes, run,
)
from wdmsim.errors import ConfigError, InvariantViolation
from wdmsim.topology import DirectedLink
from wdmsim.workload import Arrival, Pairs, Request, WorkloadSpec, generate


def test_queue_orders_by_time():
    q = EventQueue()
    q.at(5, EventKind.MESSAGE_ARRIVAL, "late")
    q.at(3, EventKind.MESSAGE_ARRIVAL, "early")
    assert [q.pop().payload for _ in range(2)] == ["early", "late"]


def test_queue_ties_in_insertion_order():
    q = EventQueue()
    for tag in "abc":
        q.at(7, EventKind.PROCESSING_DONE, tag)
    assert [q.pop().payload for _ in range(3)] == list("abc")


def test_queue_rejects_the_past():
    q = EventQueue()
    q.at(10, EventKind.MESSAGE_ARRIVAL)
    q.pop()
    with pytest.raises(TimeTravel):
        q.at(9, EventKind.MESSAGE_ARRIVAL)


def test_one_flit_hand_trace(switch):
    # t=0 Request S->R, arrives 1; processed by 3; Reply reaches S at 4;
    # flit serialized 4..5, reaches R at 6, crosses R->D optically, lands at 7.
    m = run(SimConfig(), switch, [Request(0, 0, 2, 1)])
    assert m.makespan == 7.0
    assert m.per_request_latency == {0: 7.0}


def test_empty_workload(switch):
    m = run(SimConfig(), switch, [])
    assert m.makespan == 0 and m.injected_flits == 0


def test_same_seed_same_metrics(ring):
    spec = WorkloadSpec(request_count=20, flits_per_request=5, arrival=Arrival.POISSON,
                        rate_per_us=0.5, pairs=Pairs.UNIFORM, seed=3)
    requests = generate(spec, ring)
    config = SimConfig(W=3, control_count=1, parallelism=2, seed=3, trace=True)
    a, b = Simulation(ring, config, requests), Simulation(ring, config, requests)
    assert a.run() == b.run()
    assert a.trace == b.trace


@pytest.mark.parametrize("W, control, p, lanes", [(4, 1, 16, 3), (64, 16, 16, 16), (64, 16, 1, 1)])
def test_channel_lanes(W, control, p, lanes):
    ls = LinkState.fresh(DirectedLink(0, 0, 1), W, control)
    assert channel_lanes(ls, p) == lanes


def test_baseline_lanes_ignore_control_set():
    ls = LinkState.fresh(DirectedLink(0, 0, 1), 4, 1)
    assert channel_lanes(ls, 16, Mode.BASELINE) == 4


@pytest.mark.parametrize("config", [
    SimConfig(W=4, control_count=4),
    SimConfig(W=0),
    SimConfig(parallelism=0),
    SimConfig(mode=Mode.PROPOSED_DATAGRAM, control_count=5),
])
def test_bad_configs(config, switch):
    with pytest.raises(ConfigError):
        run(config, switch, [])


def test_datagram_may_use_every_wavelength(switch):
    m = run(SimConfig(W=2, control_count=2, mode=Mode.PROPOSED_DATAGRAM), switch, [Request(0, 0, 2, 4)])
    assert m.delivered_flits == 4


def test_parallelism_shortens_makespan(switch):
    requests = [Request(i, 0, 2, 10) for i in range(6)]
    one = run(SimConfig(W=8, parallelism=1), switch, requests).makespan
    four = run(SimConfig(W=8, parallelism=4), switch, requests).makespan
    assert four < one / 2


def test_fixed_delay_start(switch):
    requests = [Request(0, 0, 2, 3)]
    ok = run(SimConfig(start=Start.FIXED_DELAY, start_delay_us=10), switch, requests)
    assert ok.delivered_flits == 3
    with pytest.raises(InvariantViolation):
        run(SimConfig(start=Start.FIXED_DELAY, start_delay_us=0), switch, requests)


def test_trace_separates_control_and_data(ring):
    requests = [Request(i, i % 5, (i + 2) % 5, 3) for i in range(10)]
    sim = Simulation(ring, SimConfig(W=3, control_count=1, trace=True), requests)
    m = sim.run()
    assert m.conserved()
    for entry in sim.trace:
        assert entry.on_control == (entry.kind != "data")
        assert (entry.wavelength == 0) == entry.on_control


def test_utilization_in_unit_range(switch):
    m = run(SimConfig(W=4, parallelism=3), switch, [Request(i, 0, 2, 20) for i in range(5)])
    assert all(0 <= u <= 1 for u in m.wavelength_utilization.values())
    assert m.wavelength_utilization[0] > 0


from hypothesis import given, settings, strategies as st

from wdmsim.topology import random_connected_graph


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(2, 7), seed=st.integers(0, 10_000), W=st.integers(2, 5),
    p=st.sampled_from([1, 2, None]), mode=st.sampled_from(list(Mode)), dynamic=st.booleans(),
)
def test_runs_conserve_and_release(n, seed, W, p, mode, dynamic):
    graph = random_connected_graph(n, seed)
    spec = WorkloadSpec(10, 3, Arrival.POISSON, 1.5, Pairs.UNIFORM, seed)
    config = SimConfig(W=W, control_count=1, parallelism=p, mode=mode, dynamic_control=dynamic, seed=seed)
    sim = Simulation(graph, config, generate(spec, graph))
    m = sim.run()
    assert m.conserved()
    assert sim.fabric.reserved_total() == 0
    assert m.delivered_flits + m.discarded_flits == m.injected_flits
