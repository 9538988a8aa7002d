"""Request generation and the electronic store-and-forward baseline."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum

from wdmsim.clock import to_ticks
from wdmsim.errors import ConfigError
from wdmsim.topology import NetworkGraph


class BadSpec(ConfigError):
    pass


@dataclass(frozen=True)
class Request:
    id: int
    src: int
    dst: int
    flits: int
    arrival: int = 0  # ticks


class Arrival(Enum):
    ALL_AT_ZERO = "all-at-zero"
    POISSON = "poisson"


class Pairs(Enum):
    SINGLE_SWITCH = "single-switch"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class WorkloadSpec:
    request_count: int = 100
    flits_per_request: int = 100
    arrival: Arrival = Arrival.ALL_AT_ZERO
    rate_per_us: float | None = None
    pairs: Pairs = Pairs.SINGLE_SWITCH
    seed: int = 0

    def check(self) -> None:
        if self.request_count < 1 or self.flits_per_request < 1:
            raise BadSpec("request and flit counts must be at least 1")
        if self.arrival is Arrival.POISSON and not (self.rate_per_us and self.rate_per_us > 0):
            raise BadSpec("poisson arrivals need a positive rate")


def switch_pair(graph: NetworkGraph) -> tuple[int, int]:
    """The two lowest-id neighbours of the lowest-id node of degree >= 2."""
    for node in graph.nodes:
        out = graph.adjacency[node.id]
        if len(out) >= 2:
            a, b = sorted(l.dst for l in out)[:2]
            return a, b
    raise BadSpec("topology has no node with two neighbours to act as the switch")


def generate(spec: WorkloadSpec, graph: NetworkGraph) -> list[Request]:
    spec.check()
    rng = random.Random(spec.seed)
    n = len(graph.nodes)
    if spec.pairs is Pairs.SINGLE_SWITCH:
        src, dst = switch_pair(graph)
    elif n < 2:
        raise BadSpec("uniform pairs need at least two nodes")
    requests = []
    t = 0.0
    for i in range(spec.request_count):
        if spec.pairs is Pairs.UNIFORM:
            src, dst = rng.sample(range(n), 2)
        if spec.arrival is Arrival.POISSON:
            t += rng.expovariate(spec.rate_per_us)
        requests.append(Request(i, src, dst, spec.flits_per_request, to_ticks(t)))
    return requests


# -- baseline -----------------------------------------------------------------


@dataclass(frozen=True)
class BaselineConfig:
    """Constants of the electronic store-and-forward switch used for comparison.

    Every flit is received, converted to the electrical domain, routed and
    converted back before it is retransmitted; a trial fails with probability
    ``min(0.95, alpha / W)`` and is repeated after ``retry_backoff``.
    """

    per_flit_processing: float = 2.0
    per_flit_conversion: float = 1.0
    alpha: float = 3.5
    retry_backoff: float = 1.0
    electronic_lanes: int | None = None  # None: one per wavelength
    seed: int = 0

    def blocking_probability(self, W: int) -> float:
        return min(0.95, self.alpha / W)

    def trial_time(self) -> float:
        return self.per_flit_processing + 2 * self.per_flit_conversion

    def lanes(self, W: int) -> int:
        return self.electronic_lanes if self.electronic_lanes is not None else W

    def check(self) -> None:
        if min(self.per_flit_processing, self.per_flit_conversion, self.retry_backoff) < 0:
            raise ConfigError("baseline durations must be non-negative")
        if self.alpha < 0:
            raise ConfigError("alpha must be non-negative")
        if self.electronic_lanes is not None and self.electronic_lanes < 1:
            raise ConfigError("electronic_lanes must be at least 1")


@dataclass
class BaselineState:
    config: BaselineConfig
    W: int
    rng: random.Random
    lane_free: list[int] = field(default_factory=list)
    trials: int = 0

    @classmethod
    def fresh(cls, config: BaselineConfig, W: int, lanes: int, seed: int | str) -> "BaselineState":
        return cls(config, W, random.Random(seed), [0] * lanes)


@dataclass(frozen=True)
class ServiceEvent:
    lane: int
    start: int
    end: int
    trials: int


def sample_trials(state: BaselineState) -> int:
    q = state.config.blocking_probability(state.W)
    trials = 1
    while state.rng.random() < q:
        trials += 1
    return trials


def baseline_step(state: BaselineState, arrival: int, lanes: int | None = None) -> ServiceEvent:
    """Serve one flit arriving at ``arrival`` ticks on the earliest-free lane.

    Calls must come in non-decreasing arrival order, which makes the lanes a
    FIFO multi-server queue. ``lanes`` may shrink the lane pool for this call.
    """
    pool = state.lane_free if lanes is None else state.lane_free[:lanes]
    lane = min(range(len(pool)), key=lambda i: (pool[i], i))
    start = max(arrival, pool[lane])
    trials = sample_trials(state)
    cfg = state.config
    busy = trials * to_ticks(cfg.trial_time()) + (trials - 1) * to_ticks(cfg.retry_backoff)
    state.lane_free[lane] = start + busy
    state.trials += trials
    return ServiceEvent(lane, start, start + busy, trials)
