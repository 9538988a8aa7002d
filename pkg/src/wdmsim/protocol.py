"""Source, routing-node and destination state machines.

Routes are carried in message headers as tuples of forward link ids. A
message moving toward the destination rides ``route[hop]``; one moving back
toward the source rides the reverse of ``route[hop]``. The routing node at the
head of ``route[j]`` is called router ``j``.

Setup runs hop by hop: the source picks the first-hop data wavelength, each
router picks its outgoing one and binds the pair in its connection table. The
router next to the destination issues the Reply, which travels back to the
first router. That router hands it to the source once one of its flit lanes
is free, so data never overtakes setup and the Reply doubles as the send
grant.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable

from wdmsim.errors import WdmSimError
from wdmsim.rwa import LinkState, assign_data_wavelength, release, reserve
from wdmsim.topology import NetworkGraph
from wdmsim.workload import Request


class ProtocolError(WdmSimError):
    pass


class UnknownConnection(ProtocolError):
    pass


class UnexpectedReply(ProtocolError):
    pass


class UnexpectedAck(ProtocolError):
    pass


class UnexpectedTeardown(ProtocolError):
    pass


class DuplicateFlit(ProtocolError):
    pass


class Kind(Enum):
    REQUEST = "request"
    REPLY = "reply"
    DATA = "data"
    ACK = "ack"
    TEARDOWN = "teardown"
    DATAGRAM = "datagram"


CONTROL_KINDS = frozenset(k for k in Kind if k is not Kind.DATA)


@dataclass(frozen=True)
class Message:
    kind: Kind
    request_id: int
    src: int
    dst: int
    route: tuple[int, ...]
    hop: int
    wavelength: int
    announced: int | None = None
    flit_index: int | None = None
    flit_count: int = 0
    upstream: bool = False


@dataclass(frozen=True)
class Emit:
    link: int
    message: Message


@dataclass
class Fabric:
    """Link states shared by every node of one simulation.

    Each link is mutated only by the node at its tail. ``in_flight`` counts
    control-plane messages currently on each (link, wavelength).
    """

    graph: NetworkGraph
    links: dict[int, LinkState]
    in_flight: Counter = field(default_factory=Counter)

    @classmethod
    def fresh(cls, graph: NetworkGraph, W: int, control_count: int) -> "Fabric":
        return cls(graph, {l.id: LinkState.fresh(l, W, control_count) for l in graph.links})

    def link_of(self, msg: Message) -> int:
        forward = msg.route[msg.hop]
        return self.graph.reverse(forward).id if msg.upstream else forward

    def reserved_total(self) -> int:
        return sum(s.reserved_count() for s in self.links.values())


def _control(fabric: Fabric, link: int, msg: Message) -> Emit:
    return Emit(link, replace(msg, wavelength=fabric.links[link].control_wavelength()))


def _upstream(fabric: Fabric, msg: Message, kind: Kind, hop: int, **kw) -> Emit:
    link = fabric.graph.reverse(msg.route[hop]).id
    out = replace(msg, kind=kind, hop=hop, upstream=True, flit_index=None, **kw)
    return _control(fabric, link, out)


# -- source -------------------------------------------------------------------


class Phase(Enum):
    QUEUED = "queued"
    WAITING_REPLY = "waiting-reply"
    WAITING_ACK = "waiting-ack"


@dataclass
class SourceState:
    node: int
    fabric: Fabric
    injection_buffer: dict[int, Request] = field(default_factory=dict)
    awaiting: dict[int, Phase] = field(default_factory=dict)
    routes: dict[int, tuple[int, ...]] = field(default_factory=dict)
    first_hop: dict[int, int] = field(default_factory=dict)

    def inject(self, request: Request, route: tuple[int, ...]) -> None:
        self.injection_buffer[request.id] = request
        self.awaiting[request.id] = Phase.QUEUED
        self.routes[request.id] = route

    def queued(self) -> list[Request]:
        return [
            r for rid, r in self.injection_buffer.items()
            if self.awaiting[rid] is Phase.QUEUED
        ]


def source_start(state: SourceState, request: Request) -> Message | None:
    """Reserve a first-hop data wavelength and emit the Request.

    Returns None, leaving the request queued, while the first-hop link has no
    free data wavelength.
    """
    route = state.routes[request.id]
    link = state.fabric.links[route[0]]
    control = link.control_wavelength()
    data = assign_data_wavelength(link)
    if data is None:
        return None
    reserve(link, data, request.id)
    state.first_hop[request.id] = data
    state.awaiting[request.id] = Phase.WAITING_REPLY
    return Message(
        Kind.REQUEST, request.id, request.src, request.dst, route, 0, control,
        announced=data, flit_count=request.flits,
    )


def _flits(state: SourceState, request_id: int, wavelength: int) -> list[Message]:
    request = state.injection_buffer[request_id]
    route = state.routes[request_id]
    return [
        Message(
            Kind.DATA, request_id, request.src, request.dst, route, 0, wavelength,
            flit_index=i, flit_count=request.flits,
        )
        for i in range(request.flits)
    ]


def source_on_reply(state: SourceState, reply: Message) -> list[Message]:
    if state.awaiting.get(reply.request_id) is not Phase.WAITING_REPLY:
        raise UnexpectedReply(f"no request {reply.request_id} awaiting a reply")
    state.awaiting[reply.request_id] = Phase.WAITING_ACK
    return _flits(state, reply.request_id, reply.announced)


def source_send_after_delay(state: SourceState, request_id: int) -> list[Message]:
    """Fixed-delay start: send on the first-hop wavelength without a Reply."""
    if state.awaiting.get(request_id) is not Phase.WAITING_REPLY:
        return []
    state.awaiting[request_id] = Phase.WAITING_ACK
    return _flits(state, request_id, state.first_hop[request_id])


def _forget(state: SourceState, request_id: int) -> None:
    release(state.fabric.links[state.routes[request_id][0]], request_id)
    del state.injection_buffer[request_id]
    del state.awaiting[request_id]
    del state.routes[request_id]
    state.first_hop.pop(request_id, None)


def source_on_ack(state: SourceState, ack: Message) -> Message:
    """Delete the request and return the Teardown for the rest of the path."""
    rid = ack.request_id
    if state.awaiting.get(rid) is not Phase.WAITING_ACK:
        raise UnexpectedAck(f"no request {rid} awaiting an acknowledgement")
    route = state.routes[rid]
    _forget(state, rid)
    teardown = replace(ack, kind=Kind.TEARDOWN, hop=0, upstream=False, announced=None)
    return _control(state.fabric, route[0], teardown).message


def source_on_discard(state: SourceState, notice: Message) -> Request:
    rid = notice.request_id
    if state.awaiting.get(rid) not in (Phase.WAITING_REPLY, Phase.WAITING_ACK):
        raise UnexpectedTeardown(f"no request {rid} in setup")
    request = state.injection_buffer[rid]
    _forget(state, rid)
    return request


def datagram_send(state: SourceState, request: Request, route: tuple[int, ...]) -> list[Message]:
    """Every flit leaves as a datagram on a control wavelength; nothing is kept."""
    control = state.fabric.links[route[0]].control_wavelength()
    return [
        Message(
            Kind.DATAGRAM, request.id, request.src, request.dst, route, 0, control,
            flit_index=i, flit_count=request.flits,
        )
        for i in range(request.flits)
    ]


# -- routing node -------------------------------------------------------------


@dataclass
class TableEntry:
    request_id: int
    in_link: int
    in_wavelength: int
    out_link: int
    out_wavelength: int
    first_router: bool
    flit_count: int
    passed: int = 0
    holds_lane: bool = False


@dataclass
class RoutingNodeState:
    node: int
    fabric: Fabric
    lane_capacity: dict[int, int] = field(default_factory=dict)
    request_queue: deque = field(default_factory=deque)
    connection_table: dict[int, TableEntry] = field(default_factory=dict)
    receivers: dict[tuple[int, int], int] = field(default_factory=dict)
    lanes_busy: Counter = field(default_factory=Counter)
    held_replies: dict[int, deque] = field(default_factory=dict)
    busy_servers: int = 0
    oe_conversions: int = 0
    wavelength_conversions: int = 0
    discards: int = 0

    def out_links(self) -> list[int]:
        return [l.id for l in self.fabric.graph.adjacency[self.node]]

    def control_servers(self) -> int:
        """One electronic control processor per control wavelength."""
        sizes = [len(self.fabric.links[l].control_set) for l in self.out_links()]
        return max(sizes, default=1) or 1


def node_on_receive(state: RoutingNodeState, msg: Message, arrival_link: int) -> list[Emit]:
    """Queue control-wavelength traffic; switch everything else optically."""
    link = state.fabric.links[arrival_link]
    if msg.wavelength in link.control_set:
        state.oe_conversions += 1
        state.request_queue.append((msg, arrival_link))
        return []
    rid = state.receivers.get((arrival_link, msg.wavelength))
    if rid is None or rid != msg.request_id:
        raise UnknownConnection(
            f"{msg.kind.value} for request {msg.request_id} on link {arrival_link} "
            f"wavelength {msg.wavelength} has no connection at node {state.node}"
        )
    entry = state.connection_table[rid]
    if entry.out_wavelength != msg.wavelength:
        state.wavelength_conversions += 1
    emits = [Emit(entry.out_link, replace(msg, hop=msg.hop + 1, wavelength=entry.out_wavelength))]
    if entry.first_router:
        entry.passed += 1
        if entry.passed == entry.flit_count and entry.holds_lane:
            entry.holds_lane = False
            state.lanes_busy[entry.out_link] -= 1
            emits += _grant_next(state, entry.out_link)
    return emits


def _grant(state: RoutingNodeState, entry: TableEntry, reply: Emit) -> list[Emit]:
    cap = state.lane_capacity.get(entry.out_link)
    if cap is None or state.lanes_busy[entry.out_link] < cap:
        state.lanes_busy[entry.out_link] += 1
        entry.holds_lane = True
        return [reply]
    state.held_replies.setdefault(entry.out_link, deque()).append((entry, reply))
    return []


def _grant_next(state: RoutingNodeState, out_link: int) -> list[Emit]:
    held = state.held_replies.get(out_link)
    if not held:
        return []
    entry, reply = held.popleft()
    state.lanes_busy[out_link] += 1
    entry.holds_lane = True
    return [reply]


def node_process_request(state: RoutingNodeState, msg: Message) -> list[Emit]:
    fabric = state.fabric
    j = msg.hop
    in_link, out_link = msg.route[j], msg.route[j + 1]
    out_state = fabric.links[out_link]
    wavelength = assign_data_wavelength(out_state)
    if wavelength is None:
        state.discards += 1
        return [_upstream(fabric, msg, Kind.TEARDOWN, j, announced=None)]
    reserve(out_state, wavelength, msg.request_id)
    entry = TableEntry(
        msg.request_id, in_link, msg.announced, out_link, wavelength,
        first_router=(j == 0), flit_count=msg.flit_count,
    )
    state.connection_table[msg.request_id] = entry
    state.receivers[(in_link, msg.announced)] = msg.request_id
    emits = [_control(fabric, out_link, replace(msg, hop=j + 1, announced=wavelength))]
    if fabric.graph.link(out_link).dst == msg.dst:
        reply = _upstream(fabric, msg, Kind.REPLY, j, announced=msg.announced)
        emits += _grant(state, entry, reply) if j == 0 else [reply]
    return emits


def _drop_entry(state: RoutingNodeState, request_id: int) -> TableEntry | None:
    entry = state.connection_table.pop(request_id, None)
    if entry is not None:
        release(state.fabric.links[entry.out_link], request_id)
        state.receivers.pop((entry.in_link, entry.in_wavelength), None)
    return entry


def node_process(state: RoutingNodeState, msg: Message) -> list[Emit]:
    """Handle one control message taken from the head of the request queue."""
    fabric = state.fabric
    if msg.kind is Kind.REQUEST:
        return node_process_request(state, msg)
    if msg.kind is Kind.DATAGRAM:
        return datagram_forward(state, msg)
    if msg.upstream:
        j = msg.hop - 1  # this node is the head of route[j]
        if msg.kind is Kind.TEARDOWN:
            _drop_entry(state, msg.request_id)
            return [_upstream(fabric, msg, Kind.TEARDOWN, j)]
        if msg.kind is Kind.REPLY and j == 0:
            entry = state.connection_table.get(msg.request_id)
            if entry is None:
                raise UnknownConnection(f"reply for unknown request {msg.request_id}")
            reply = _upstream(fabric, msg, Kind.REPLY, 0, announced=entry.in_wavelength)
            return _grant(state, entry, reply)
        return [_upstream(fabric, msg, msg.kind, j)]
    if msg.kind is Kind.TEARDOWN:
        if _drop_entry(state, msg.request_id) is None:
            raise UnknownConnection(f"teardown for unknown request {msg.request_id}")
        return [_control(fabric, msg.route[msg.hop + 1], replace(msg, hop=msg.hop + 1))]
    raise ProtocolError(f"router cannot process {msg.kind.value} heading downstream")


def datagram_forward(state: RoutingNodeState, msg: Message) -> list[Emit]:
    nxt = msg.route[msg.hop + 1]
    return [_control(state.fabric, nxt, replace(msg, hop=msg.hop + 1))]


@dataclass(frozen=True)
class ControlPolicy:
    grow_above: int = 4
    shrink_below: int = 1
    keep_data_wavelength: bool = True


def adjust_control_set(
    state: RoutingNodeState, link: int, policy: ControlPolicy = ControlPolicy()
) -> set[int]:
    """Grow or shrink the control set of an outgoing link from queue length."""
    ls = state.fabric.links[link]
    queued = len(state.request_queue)
    if queued > policy.grow_above:
        cap = ls.W - 1 if policy.keep_data_wavelength else ls.W
        free = ls.free_data_wavelengths()
        if free and len(ls.control_set) < cap:
            ls.control_set.add(free[0])
    elif queued < policy.shrink_below and len(ls.control_set) > 1:
        top = max(ls.control_set)
        if state.fabric.in_flight[(link, top)] == 0:
            ls.control_set.discard(top)
    return ls.control_set


# -- destination --------------------------------------------------------------


@dataclass
class DestinationState:
    node: int
    fabric: Fabric
    delivery_buffer: dict[int, set[int]] = field(default_factory=dict)
    completed: set[int] = field(default_factory=set)
    bound: dict[int, int] = field(default_factory=dict)
    oe_conversions: int = 0

    def delivered(self) -> int:
        return sum(len(v) for v in self.delivery_buffer.values())


def _store(state: DestinationState, flit: Message) -> bool:
    got = state.delivery_buffer.setdefault(flit.request_id, set())
    if flit.flit_index in got or flit.request_id in state.completed:
        raise DuplicateFlit(f"request {flit.request_id} flit {flit.flit_index} twice")
    got.add(flit.flit_index)
    if len(got) == flit.flit_count:
        state.completed.add(flit.request_id)
        return True
    return False


def destination_on_request(state: DestinationState, request: Message) -> list[Emit]:
    """Bind the receiver to the announced wavelength; answer directly when no
    router sits between source and destination."""
    state.bound[request.request_id] = request.announced
    if len(request.route) == 1:
        return [_upstream(state.fabric, request, Kind.REPLY, 0, announced=request.announced)]
    return []


def destination_on_flit(state: DestinationState, flit: Message) -> Message | None:
    if not _store(state, flit):
        return None
    last = len(flit.route) - 1
    return _upstream(state.fabric, flit, Kind.ACK, last).message


def destination_on_teardown(state: DestinationState, teardown: Message) -> None:
    state.bound.pop(teardown.request_id, None)


def destination_on_datagram(state: DestinationState, datagram: Message) -> bool:
    """Store a datagram; True once its request is complete. No Ack is sent."""
    return _store(state, datagram)


def control_kinds_ok(messages: Iterable[tuple[Message, LinkState]]) -> list[str]:
    """Check control/data wavelength separation for (message, link) pairs."""
    problems = []
    for msg, ls in messages:
        on_control = msg.wavelength in ls.control_set
        if msg.kind is Kind.DATA and on_control:
            problems.append(f"data flit {msg.request_id}/{msg.flit_index} on control wavelength")
        if msg.kind is not Kind.DATA and not on_control:
            problems.append(f"{msg.kind.value} {msg.request_id} off the control set")
    return problems
