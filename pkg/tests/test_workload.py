from statistics import fmean

import pytest

from wdmsim.workload import (
    Arrival, BadSpec, BaselineConfig, BaselineState, Pairs, WorkloadSpec, baseline_step,
    generate, sample_trials, switch_pair,
)
from wdmsim.simkernel import Mode, SimConfig, run
from wdmsim.workload import Request


def test_default_workload(switch):
    requests = generate(WorkloadSpec(), switch)
    assert len(requests) == 100
    assert sum(r.flits for r in requests) == 10_000
    assert {(r.src, r.dst) for r in requests} == {switch_pair(switch)} == {(0, 2)}
    assert {r.arrival for r in requests} == {0}


def test_single_flit_workload(switch):
    [r] = generate(WorkloadSpec(request_count=1, flits_per_request=1), switch)
    assert r.flits == 1


def test_same_seed_same_workload(ring):
    spec = WorkloadSpec(20, 3, Arrival.POISSON, 0.4, Pairs.UNIFORM, seed=11)
    assert generate(spec, ring) == generate(spec, ring)
    arrivals = [r.arrival for r in generate(spec, ring)]
    assert arrivals == sorted(arrivals) and arrivals[-1] > 0


@pytest.mark.parametrize("spec", [
    WorkloadSpec(request_count=0),
    WorkloadSpec(flits_per_request=0),
    WorkloadSpec(arrival=Arrival.POISSON),
])
def test_bad_specs(spec, switch):
    with pytest.raises(BadSpec):
        generate(spec, switch)


def test_no_retry_service(switch):
    cfg = BaselineConfig(alpha=0.0)
    state = BaselineState.fresh(cfg, 4, 1, seed=0)
    ev = baseline_step(state, 0)
    assert (ev.start, ev.end, ev.trials) == (0, 400, 1)
    m = run(SimConfig(mode=Mode.BASELINE, baseline=cfg), switch, [Request(0, 0, 2, 1)])
    # 1 us serialization + 1 us to the switch + 4 us service + 1 us onward
    assert m.makespan == 7.0


def test_lanes_form_a_fifo_queue():
    state = BaselineState.fresh(BaselineConfig(alpha=0.0), 4, 2, seed=0)
    events = [baseline_step(state, 0) for _ in range(3)]
    assert [(e.lane, e.start) for e in events] == [(0, 0), (1, 0), (0, 400)]


def test_geometric_trials_mean():
    # q = alpha / W = 0.5, so the mean number of trials is 1 / (1 - q) = 2
    state = BaselineState.fresh(BaselineConfig(alpha=2.0), 4, 1, seed=1)
    n = 100_000
    mean = sum(sample_trials(state) for _ in range(n)) / n
    assert abs(mean - 2.0) / 2.0 < 0.02


def test_mean_service_non_increasing_in_W():
    means = []
    for W in (4, 16, 64):
        state = BaselineState.fresh(BaselineConfig(), W, 1, seed=W)
        events = [baseline_step(state, 0) for _ in range(20_000)]
        means.append(fmean(e.end - e.start for e in events))
    assert means[0] >= means[1] >= means[2]


def test_blocking_probability_cap():
    cfg = BaselineConfig()
    assert cfg.blocking_probability(1) == 0.95
    assert cfg.blocking_probability(64) == pytest.approx(3.5 / 64)
