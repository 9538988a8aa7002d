"""Routing and wavelength assignment.

Every node can convert wavelengths, so a lightpath needs only one free data
wavelength on each of its links, chosen independently per link.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from wdmsim.errors import WdmSimError
from wdmsim.topology import DirectedLink, NetworkGraph


class NoPath(WdmSimError):
    pass


class AlreadyOccupied(WdmSimError):
    pass


class ControlWavelengthMisuse(WdmSimError):
    pass


class NoControlWavelength(WdmSimError):
    pass


CONTROL = "control"


@dataclass
class LinkState:
    """Wavelength occupancy of one directed fiber link."""

    link: DirectedLink
    W: int
    control_set: set[int]
    occupancy: dict[int, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.W < 1:
            raise ValueError("a link needs at least one wavelength")
        bad = [w for w in self.control_set if not 0 <= w < self.W]
        if bad:
            raise ValueError(f"control wavelengths {bad} outside [0, {self.W})")

    @classmethod
    def fresh(cls, link: DirectedLink, W: int, control_count: int) -> "LinkState":
        return cls(link, W, set(range(control_count)))

    def occupant(self, wavelength: int) -> int | str | None:
        if wavelength in self.control_set:
            return CONTROL
        return self.occupancy.get(wavelength)

    def data_wavelengths(self) -> list[int]:
        return [w for w in range(self.W) if w not in self.control_set]

    def free_data_wavelengths(self) -> list[int]:
        return [
            w for w in range(self.W)
            if w not in self.control_set and w not in self.occupancy
        ]

    def control_wavelength(self) -> int:
        if not self.control_set:
            raise NoControlWavelength(f"link {self.link.id} has no control wavelength")
        return min(self.control_set)

    def reserved_count(self) -> int:
        return len(self.occupancy)

    def snapshot(self) -> tuple[frozenset[int], tuple[tuple[int, int], ...]]:
        return frozenset(self.control_set), tuple(sorted(self.occupancy.items()))


@dataclass(frozen=True)
class Path:
    src: int
    dst: int
    hops: tuple[DirectedLink, ...]

    def __len__(self) -> int:
        return len(self.hops)

    @property
    def link_ids(self) -> tuple[int, ...]:
        return tuple(l.id for l in self.hops)

    def nodes(self) -> list[int]:
        return [self.src] + [l.dst for l in self.hops]


def shortest_path(graph: NetworkGraph, src: int, dst: int) -> Path:
    """Minimum-hop path; at each step the smallest-id link that stays on a
    shortest path is taken."""
    graph.node(src)
    graph.node(dst)
    if src == dst:
        raise NoPath("source and destination coincide")
    # hop distance to dst over reversed links
    dist = {dst: 0}
    frontier = deque([dst])
    while frontier:
        v = frontier.popleft()
        for link in graph.adjacency[v]:
            u = link.dst  # reverse link u->v exists in a valid graph
            if u not in dist:
                dist[u] = dist[v] + 1
                frontier.append(u)
    if src not in dist:
        raise NoPath(f"{graph.label(src)} cannot reach {graph.label(dst)}")
    hops = []
    here = src
    while here != dst:
        link = next(l for l in graph.adjacency[here] if dist.get(l.dst) == dist[here] - 1)
        hops.append(link)
        here = link.dst
    return Path(src, dst, tuple(hops))


def assign_data_wavelength(state: LinkState) -> int | None:
    """First-fit: lowest free wavelength outside the control set, or None."""
    for w in range(state.W):
        if w not in state.control_set and w not in state.occupancy:
            return w
    return None


def reserve(state: LinkState, wavelength: int, connection_id: int) -> LinkState:
    if wavelength in state.control_set:
        raise ControlWavelengthMisuse(
            f"wavelength {wavelength} is a control wavelength on link {state.link.id}"
        )
    if not 0 <= wavelength < state.W:
        raise ValueError(f"wavelength {wavelength} outside [0, {state.W})")
    holder = state.occupancy.get(wavelength)
    if holder is not None:
        raise AlreadyOccupied(
            f"link {state.link.id} wavelength {wavelength} held by {holder}"
        )
    state.occupancy[wavelength] = connection_id
    return state


def release(state: LinkState, connection_id: int) -> LinkState:
    for w in [w for w, c in state.occupancy.items() if c == connection_id]:
        del state.occupancy[w]
    return state


def feasible(path: Path, link_states: dict[int, LinkState]) -> list[int] | None:
    assignment = []
    for link in path.hops:
        w = assign_data_wavelength(link_states[link.id])
        if w is None:
            return None
        assignment.append(w)
    return assignment


class ConnectionState(Enum):
    SETTING_UP = "setting-up"
    ESTABLISHED = "established"
    TORN_DOWN = "torn-down"
    DISCARDED = "discarded"


@dataclass
class Connection:
    id: int
    path: Path
    assigned: list[int] = field(default_factory=list)
    state: ConnectionState = ConnectionState.SETTING_UP
