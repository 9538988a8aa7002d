"""Deterministic discrete-event engine driving the protocol state machines.

Timing model (all configurable through :class:`TimingConfig`):

* a message needs ``propagation_delay`` to cross one fiber link;
* control-plane messages are short bursts with no serialization time;
* a data flit or datagram occupies its wavelength for ``flit_cycle``;
* a routing node spends ``switch_processing + oe_conversion`` on each control
  message, with one processor per control wavelength;
* end hosts (source of a Reply/Ack, destination of a Request/Teardown) act on
  control messages on arrival;
* data flits pass a routing node optically, with no added delay.
"""

from __future__ import annotations

import heapq
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from enum import Enum, IntEnum
from typing import Any, Iterable

from wdmsim import protocol as proto
from wdmsim.clock import to_ticks
from wdmsim.errors import ConfigError, InvariantViolation, WdmSimError
from wdmsim.metrics import Metrics, Obs, Observation, record
from wdmsim.protocol import ControlPolicy, Emit, Fabric, Kind, Message
from wdmsim.rwa import LinkState, NoPath, shortest_path
from wdmsim.topology import NetworkGraph, validate
from wdmsim.workload import BaselineConfig, BaselineState, Request, baseline_step


class TimeTravel(WdmSimError):
    pass


class EventKind(IntEnum):
    MESSAGE_ARRIVAL = 0
    PROCESSING_DONE = 1
    TRANSMISSION_SLOT_FREE = 2
    WORKLOAD_INJECTION = 3


@dataclass(frozen=True)
class Event:
    time: int
    kind: EventKind
    payload: Any = None
    sequence: int = -1


class EventQueue:
    """Min-heap on (time, sequence); equal times pop in insertion order."""

    def __init__(self) -> None:
        self._heap: list[tuple[int, int, Event]] = []
        self._seq = 0
        self.now = 0

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, event: Event) -> Event:
        if event.time < self.now:
            raise TimeTravel(f"event at {event.time} scheduled from {self.now}")
        event = replace(event, sequence=self._seq)
        heapq.heappush(self._heap, (event.time, self._seq, event))
        self._seq += 1
        return event

    def at(self, time: int, kind: EventKind, payload: Any = None) -> Event:
        return self.schedule(Event(time, kind, payload))

    def pop(self) -> Event:
        _, _, event = heapq.heappop(self._heap)
        self.now = event.time
        return event


@dataclass(frozen=True)
class TimingConfig:
    propagation_delay: float = 1.0
    switch_processing: float = 2.0
    flit_cycle: float = 1.0
    oe_conversion: float = 0.0

    def check(self) -> None:
        for name, value in asdict(self).items():
            if value < 0:
                raise ConfigError(f"{name} must be >= 0, got {value}")


class Mode(str, Enum):
    PROPOSED_CONNECTION = "proposed-connection"
    PROPOSED_DATAGRAM = "proposed-datagram"
    BASELINE = "baseline"


class Start(str, Enum):
    REPLY = "reply"
    FIXED_DELAY = "fixed-delay"


@dataclass(frozen=True)
class SimConfig:
    W: int = 4
    control_count: int = 1
    parallelism: int | None = 1
    mode: Mode = Mode.PROPOSED_CONNECTION
    timing: TimingConfig = field(default_factory=TimingConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    dynamic_control: bool = False
    control_policy: ControlPolicy = field(default_factory=ControlPolicy)
    start: Start = Start.REPLY
    start_delay_us: float = 10.0
    seed: int = 0
    check_invariants: bool = True
    trace: bool = False

    def check(self) -> None:
        if self.W < 1:
            raise ConfigError("need at least one wavelength")
        if self.parallelism is not None and self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if self.mode is Mode.PROPOSED_CONNECTION and not 1 <= self.control_count <= self.W - 1:
            raise ConfigError(
                f"connection mode needs 1 <= control wavelengths <= W-1 "
                f"(got {self.control_count} of W={self.W}): at least one data wavelength must remain"
            )
        if self.mode is not Mode.PROPOSED_CONNECTION and not 1 <= self.control_count <= self.W:
            raise ConfigError(
                f"need 1 <= control wavelengths <= W (got {self.control_count} of W={self.W})"
            )
        if self.start_delay_us < 0:
            raise ConfigError("start delay must be >= 0")
        self.timing.check()
        self.baseline.check()

    def echo(self) -> dict[str, Any]:
        return {
            "W": self.W, "control_count": self.control_count,
            "parallelism": self.parallelism, "mode": self.mode.value,
            "dynamic_control": self.dynamic_control, "start": self.start.value,
            "seed": self.seed, "timing": asdict(self.timing),
        }


def channel_lanes(
    link_state: LinkState,
    parallelism: int | None,
    mode: Mode = Mode.PROPOSED_CONNECTION,
    electronic_lanes: int | None = None,
) -> int:
    """Flit lanes a switch port can serve at once."""
    if mode is Mode.BASELINE:
        cap = electronic_lanes if electronic_lanes is not None else link_state.W
    else:
        cap = len(link_state.free_data_wavelengths())
    return cap if parallelism is None else min(parallelism, cap)


@dataclass(frozen=True)
class TraceEntry:
    time: int
    kind: str
    link: int
    wavelength: int
    request_id: int
    flit_index: int | None
    on_control: bool


class Simulation:
    def __init__(self, graph: NetworkGraph, config: SimConfig, requests: Iterable[Request]):
        config.check()
        problems = validate(graph)
        if problems:
            raise ConfigError("invalid topology: " + ", ".join(map(str, problems)))
        self.graph = graph
        self.config = config
        self.requests = sorted(requests, key=lambda r: (r.arrival, r.id))
        self.fabric = Fabric.fresh(graph, config.W, config.control_count)
        self.queue = EventQueue()
        self.metrics = Metrics(seed=config.seed, config=config.echo())
        self.trace: list[TraceEntry] | None = [] if config.trace else None
        t = config.timing
        self.prop = to_ticks(t.propagation_delay)
        self.cycle = to_ticks(t.flit_cycle)
        self.proc = to_ticks(t.switch_processing + t.oe_conversion)
        self.start_delay = to_ticks(config.start_delay_us)

        nodes = [n.id for n in graph.nodes]
        self.sources = {n: proto.SourceState(n, self.fabric) for n in nodes}
        self.dests = {n: proto.DestinationState(n, self.fabric) for n in nodes}
        lanes: dict[int, int] = {}
        if config.parallelism is not None:
            for link_id, ls in self.fabric.links.items():
                lanes[link_id] = channel_lanes(ls, config.parallelism, config.mode)
        self.routers = {
            n: proto.RoutingNodeState(
                n, self.fabric,
                lane_capacity={l.id: lanes[l.id] for l in graph.adjacency[n] if l.id in lanes},
            )
            for n in nodes
        }
        self.baselines: dict[int, BaselineState] = {}
        if config.mode is Mode.BASELINE:
            elanes = config.baseline.lanes(config.W)
            count = elanes if config.parallelism is None else min(config.parallelism, elanes)
            for n in nodes:
                self.baselines[n] = BaselineState.fresh(
                    config.baseline, config.W, count,
                    seed=f"{config.seed}/{config.baseline.seed}/{n}",
                )
        self._paths: dict[tuple[int, int], tuple[int, ...] | None] = {}
        self._tx_free: dict[tuple[int, int], int] = {}
        self._last_tx: dict[tuple[int, int], tuple[int, int]] = {}
        self._busy_ticks: Counter = Counter()
        self._pending = 0
        self._network = 0
        self._control_sizes: dict[int, list[int]] = {}

    # -- plumbing -------------------------------------------------------------

    def route(self, src: int, dst: int) -> tuple[int, ...] | None:
        key = (src, dst)
        if key not in self._paths:
            try:
                self._paths[key] = shortest_path(self.graph, src, dst).link_ids
            except NoPath:
                self._paths[key] = None
        return self._paths[key]

    def _fail(self, why: str) -> None:
        raise InvariantViolation(f"t={self.queue.now / 100:.2f}us: {why}")

    def _note(self, link: int, msg: Message, on_control: bool) -> None:
        if self.trace is not None:
            self.trace.append(TraceEntry(
                self.queue.now, msg.kind.value, link, msg.wavelength,
                msg.request_id, msg.flit_index, on_control,
            ))

    def _occupy(self, link: int, wavelength: int, start: int, end: int, owner: int) -> None:
        """Contention monitor: one transmission per (link, wavelength) at a time."""
        key = (link, wavelength)
        last = self._last_tx.get(key)
        if last is not None and start < last[0]:
            self._fail(
                f"contention on {self.graph.describe(link)} wavelength {wavelength}: "
                f"request {owner} overlaps request {last[1]}"
            )
        self._last_tx[key] = (end, owner)
        self._busy_ticks[link] += end - start

    def send_control(self, emit: Emit, duration: int = 0) -> None:
        link, msg = emit.link, emit.message
        ls = self.fabric.links[link]
        if self.config.check_invariants and msg.wavelength not in ls.control_set:
            self._fail(f"{msg.kind.value} for request {msg.request_id} off the control set")
        start = self.queue.now
        if duration:
            # serialized control traffic (datagrams): earliest free control transmitter
            now = self.queue.now
            wl = min(ls.control_set, key=lambda w: (max(now, self._tx_free.get((link, w), 0)), w))
            msg = replace(msg, wavelength=wl)
            start = max(now, self._tx_free.get((link, wl), 0))
            self._tx_free[(link, wl)] = start + duration
            self._occupy(link, wl, start, start + duration, msg.request_id)
        self._note(link, msg, True)
        self.fabric.in_flight[(link, msg.wavelength)] += 1
        self.queue.at(start + duration + self.prop, EventKind.MESSAGE_ARRIVAL, (msg, link))

    def send_data(self, link: int, flits: list[Message], start: int) -> None:
        """Source-side serialization of flits on their connection's wavelength."""
        ls = self.fabric.links[link]
        for i, flit in enumerate(flits):
            t0 = start + i * self.cycle
            if self.config.check_invariants:
                if flit.wavelength in ls.control_set:
                    self._fail(f"data flit of request {flit.request_id} on a control wavelength")
                if ls.occupancy.get(flit.wavelength) != flit.request_id:
                    self._fail(
                        f"request {flit.request_id} sends on wavelength {flit.wavelength} "
                        f"of {self.graph.describe(link)} without holding it"
                    )
            self._occupy(link, flit.wavelength, t0, t0 + self.cycle, flit.request_id)
            self._note(link, flit, False)
            self.queue.at(t0 + self.cycle + self.prop, EventKind.MESSAGE_ARRIVAL, (flit, link))
        self._pending -= len(flits)
        self._network += len(flits)

    # -- event handlers ---------------------------------------------------------

    def _inject(self, request: Request) -> None:
        now = self.queue.now
        record(self.metrics, Observation(Obs.INJECTED, now, request.id, request.flits))
        self._pending += request.flits
        route = self.route(request.src, request.dst)
        mode = self.config.mode
        if route is None:
            self._pending -= request.flits
            kind = Obs.DISCARDED if mode is Mode.PROPOSED_CONNECTION else Obs.DROPPED
            record(self.metrics, Observation(kind, now, request.id, request.flits))
            return
        src = self.sources[request.src]
        if mode is Mode.PROPOSED_CONNECTION:
            src.inject(request, route)
            self._start_queued(request.src)
        elif mode is Mode.PROPOSED_DATAGRAM:
            for dg in proto.datagram_send(src, request, route):
                self.send_control(Emit(route[0], dg), duration=self.cycle)
            self._pending -= request.flits
            self._network += request.flits
        else:
            self._baseline_source(request, route)

    def _start_queued(self, node: int) -> None:
        src = self.sources[node]
        for request in src.queued():
            msg = proto.source_start(src, request)
            if msg is None:
                continue
            self.send_control(Emit(msg.route[0], msg))
            if self.config.start is Start.FIXED_DELAY:
                self.queue.at(
                    self.queue.now + self.start_delay,
                    EventKind.TRANSMISSION_SLOT_FREE, (node, request.id),
                )

    def _baseline_source(self, request: Request, route: tuple[int, ...]) -> None:
        link = route[0]
        now = self.queue.now
        for i in range(request.flits):
            wl = min(range(self.config.W), key=lambda w: (max(now, self._tx_free.get((link, w), 0)), w))
            start = max(now, self._tx_free.get((link, wl), 0))
            end = start + self.cycle
            self._tx_free[(link, wl)] = end
            flit = Message(
                Kind.DATA, request.id, request.src, request.dst, route, 0, wl,
                flit_index=i, flit_count=request.flits,
            )
            self._occupy(link, wl, start, end, request.id)
            self._note(link, flit, False)
            self.queue.at(end + self.prop, EventKind.MESSAGE_ARRIVAL, (flit, link))
        self._pending -= request.flits
        self._network += request.flits

    def _deliver(self, msg: Message, complete: bool) -> None:
        self._network -= 1
        record(self.metrics, Observation(
            Obs.DELIVERED, self.queue.now, msg.request_id, 1, complete=complete,
        ))

    def _arrival(self, msg: Message, link: int) -> None:
        node = self.graph.link(link).dst
        ls = self.fabric.links[link]
        on_control = msg.kind is not Kind.DATA
        if on_control:
            self.fabric.in_flight[(link, msg.wavelength)] -= 1
            if msg.wavelength not in ls.control_set:
                self._fail(f"{msg.kind.value} arrived on a data wavelength")
            record(self.metrics, Observation(Obs.CONVERSION))
        mode = self.config.mode
        if mode is Mode.BASELINE:
            self._baseline_arrival(msg, link, node)
        elif msg.kind is Kind.DATAGRAM:
            if node == msg.dst:
                self._deliver(msg, proto.destination_on_datagram(self.dests[node], msg))
            else:
                self._enqueue(node, msg, link)
        elif not on_control:
            if node == msg.dst:
                ack = proto.destination_on_flit(self.dests[node], msg)
                self._deliver(msg, ack is not None)
                if ack is not None:
                    self.send_control(Emit(self.fabric.link_of(ack), ack))
            else:
                for emit in proto.node_on_receive(self.routers[node], msg, link):
                    if emit.message.kind is Kind.DATA:
                        self._pass_through(emit)
                    else:
                        self.send_control(emit)
        elif node == msg.dst and not msg.upstream:
            if msg.kind is Kind.REQUEST:
                for emit in proto.destination_on_request(self.dests[node], msg):
                    self.send_control(emit)
            elif msg.kind is Kind.TEARDOWN:
                proto.destination_on_teardown(self.dests[node], msg)
        elif node == msg.src and msg.upstream:
            self._source_control(node, msg)
        else:
            self._enqueue(node, msg, link)

    def _source_control(self, node: int, msg: Message) -> None:
        src = self.sources[node]
        if msg.kind is Kind.REPLY:
            if self.config.start is Start.FIXED_DELAY:
                return
            flits = proto.source_on_reply(src, msg)
            self.send_data(msg.route[0], flits, self.queue.now)
        elif msg.kind is Kind.ACK:
            teardown = proto.source_on_ack(src, msg)
            self.send_control(Emit(teardown.route[0], teardown))
            self._start_queued(node)
        elif msg.kind is Kind.TEARDOWN:
            request = proto.source_on_discard(src, msg)
            self._pending -= request.flits
            record(self.metrics, Observation(Obs.DISCARDED, self.queue.now, request.id, request.flits))
            self._start_queued(node)

    def _pass_through(self, emit: Emit) -> None:
        now = self.queue.now
        msg = emit.message
        if self.config.check_invariants:
            ls = self.fabric.links[emit.link]
            if ls.occupancy.get(msg.wavelength) != msg.request_id:
                self._fail(f"request {msg.request_id} switched onto an unreserved wavelength")
        self._occupy(emit.link, msg.wavelength, now - self.cycle, now, msg.request_id)
        self._note(emit.link, msg, False)
        self.queue.at(now + self.prop, EventKind.MESSAGE_ARRIVAL, (msg, emit.link))

    def _enqueue(self, node: int, msg: Message, link: int) -> None:
        proto.node_on_receive(self.routers[node], msg, link)
        self._serve(node)

    def _serve(self, node: int) -> None:
        router = self.routers[node]
        while router.request_queue and router.busy_servers < router.control_servers():
            msg, _ = router.request_queue.popleft()
            router.busy_servers += 1
            self.queue.at(self.queue.now + self.proc, EventKind.PROCESSING_DONE, (node, msg))

    def _processed(self, node: int, msg: Message) -> None:
        router = self.routers[node]
        router.busy_servers -= 1
        for emit in proto.node_process(router, msg):
            if emit.message.kind is Kind.DATAGRAM:
                self.send_control(emit, duration=self.cycle)
            else:
                self.send_control(emit)
        if self.config.dynamic_control:
            policy = self.config.control_policy
            if self.config.mode is Mode.PROPOSED_DATAGRAM:
                policy = replace(policy, keep_data_wavelength=False)
            for link in router.out_links():
                proto.adjust_control_set(router, link, policy)
                self._control_sizes.setdefault(link, []).append(
                    len(self.fabric.links[link].control_set)
                )
        # transit teardowns free this node's outgoing wavelengths too
        if self.config.mode is Mode.PROPOSED_CONNECTION:
            self._start_queued(node)
        self._serve(node)

    def _baseline_arrival(self, msg: Message, link: int, node: int) -> None:
        if node == msg.dst:
            self._deliver(msg, proto.destination_on_datagram(self.dests[node], msg))
            return
        service = baseline_step(self.baselines[node], self.queue.now)
        record(self.metrics, Observation(Obs.CONVERSION, flits=service.trials))
        self.queue.at(service.end, EventKind.PROCESSING_DONE, (node, msg, service))

    def _baseline_done(self, node: int, msg: Message, service) -> None:
        out = msg.route[msg.hop + 1]
        now = self.queue.now
        # the E/O conversion ending the service is the retransmission; it
        # shares the outgoing transmitters with traffic this node originates
        conv = to_ticks(self.config.baseline.per_flit_conversion) or self.cycle
        ready = now - conv
        wl = min(range(self.config.W), key=lambda w: (max(ready, self._tx_free.get((out, w), 0)), w))
        start = max(ready, self._tx_free.get((out, wl), 0))
        self._tx_free[(out, wl)] = start + conv
        fwd = replace(msg, hop=msg.hop + 1, wavelength=wl)
        self._occupy(out, wl, start, start + conv, msg.request_id)
        self._note(out, fwd, False)
        self.queue.at(start + conv + self.prop, EventKind.MESSAGE_ARRIVAL, (fwd, out))

    # -- main loop --------------------------------------------------------------

    def _check_step(self) -> None:
        m = self.metrics
        accounted = (
            m.delivered_flits + m.discarded_flits + m.dropped_datagrams
            + self._pending + self._network
        )
        if accounted != m.injected_flits:
            self._fail(f"flit conservation broken: {m.injected_flits} injected, {accounted} accounted")
        for ls in self.fabric.links.values():
            if ls.occupancy and not ls.control_set.isdisjoint(ls.occupancy):
                self._fail(f"data occupant on a control wavelength of link {ls.link.id}")

    def run(self) -> Metrics:
        for request in self.requests:
            self.queue.at(request.arrival, EventKind.WORKLOAD_INJECTION, request)
        check = self.config.check_invariants
        events = 0
        try:
            while self.queue:
                event = self.queue.pop()
                events += 1
                kind, payload = event.kind, event.payload
                if kind is EventKind.MESSAGE_ARRIVAL:
                    self._arrival(*payload)
                elif kind is EventKind.PROCESSING_DONE:
                    if self.config.mode is Mode.BASELINE:
                        self._baseline_done(*payload)
                    else:
                        self._processed(*payload)
                elif kind is EventKind.WORKLOAD_INJECTION:
                    self._inject(payload)
                else:
                    node, rid = payload
                    flits = proto.source_send_after_delay(self.sources[node], rid)
                    if flits:
                        self.send_data(flits[0].route[0], flits, self.queue.now)
                if check:
                    self._check_step()
        except InvariantViolation:
            raise
        except WdmSimError as exc:
            raise InvariantViolation(
                f"t={self.queue.now / 100:.2f}us: {type(exc).__name__}: {exc}"
            ) from exc
        self.metrics.events = events
        self._finish()
        return self.metrics

    def _finish(self) -> None:
        m = self.metrics
        if self.config.check_invariants:
            if not m.conserved():
                self._fail(f"{m.in_flight} flits never reached an end state")
            left = self.fabric.reserved_total()
            if left:
                self._fail(f"{left} wavelengths still reserved after the run")
        m.wavelength_conversions = sum(r.wavelength_conversions for r in self.routers.values())
        horizon = self.queue.now - (m.first_injection or 0)
        for link in self.fabric.links:
            m.wavelength_utilization[link] = (
                self._busy_ticks[link] / (self.config.W * horizon) if horizon > 0 else 0.0
            )

    def control_history(self, link: int) -> list[int]:
        """Control-set sizes of ``link`` after each processed message (dynamic mode)."""
        return list(self._control_sizes.get(link, []))


def run(config: SimConfig, graph: NetworkGraph, workload: Iterable[Request]) -> Metrics:
    return Simulation(graph, config, workload).run()
