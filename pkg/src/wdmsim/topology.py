"""Network graph model: routers joined by pairs of opposite fiber links.

Topology documents are JSON objects of the form::

    {"nodes": ["A", "B", "C"], "edges": [["A", "B"], ["B", "C"]], "max_degree": 4}

``max_degree`` is optional. Any other key is rejected.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

from wdmsim.errors import ConfigError


class TopologyError(ConfigError):
    pass


class UnknownEndpoint(TopologyError):
    pass


class DuplicateEdge(TopologyError):
    pass


class SelfLoop(TopologyError):
    pass


class UnknownNode(TopologyError, KeyError):
    pass


@dataclass(frozen=True, order=True)
class Node:
    id: int
    label: str

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class DirectedLink:
    id: int
    src: int
    dst: int


@dataclass(frozen=True)
class Violation:
    """One broken graph invariant, e.g. ``Violation("MissingReverse", "A->B")``."""

    kind: str
    element: str

    def __str__(self) -> str:
        return f"{self.kind}({self.element})"


@dataclass(frozen=True)
class NetworkGraph:
    nodes: tuple[Node, ...]
    links: tuple[DirectedLink, ...]
    max_degree: int | None = None
    _out: dict[int, tuple[DirectedLink, ...]] = field(
        init=False, repr=False, compare=False, default_factory=dict
    )
    _by_pair: dict[tuple[int, int], DirectedLink] = field(
        init=False, repr=False, compare=False, default_factory=dict
    )
    _by_label: dict[str, Node] = field(
        init=False, repr=False, compare=False, default_factory=dict
    )

    def __post_init__(self) -> None:
        for node in self.nodes:
            self._out[node.id] = ()
            self._by_label[node.label] = node
        grouped: dict[int, list[DirectedLink]] = {}
        for link in sorted(self.links, key=lambda l: l.id):
            grouped.setdefault(link.src, []).append(link)
            self._by_pair.setdefault((link.src, link.dst), link)
        for src, out in grouped.items():
            self._out[src] = tuple(out)

    @property
    def adjacency(self) -> Mapping[int, tuple[DirectedLink, ...]]:
        return self._out

    @property
    def edge_count(self) -> int:
        return len(self.links) // 2

    def node(self, key: int | str) -> Node:
        if isinstance(key, str):
            try:
                return self._by_label[key]
            except KeyError:
                raise UnknownNode(key) from None
        if not 0 <= key < len(self.nodes) or self.nodes[key].id != key:
            raise UnknownNode(key)
        return self.nodes[key]

    def label(self, node_id: int) -> str:
        return self.node(node_id).label

    def link(self, link_id: int) -> DirectedLink:
        return self.links[link_id]

    def link_between(self, src: int, dst: int) -> DirectedLink:
        try:
            return self._by_pair[(src, dst)]
        except KeyError:
            raise UnknownNode(f"no link {self.label(src)}->{self.label(dst)}") from None

    def reverse(self, link: DirectedLink | int) -> DirectedLink:
        if isinstance(link, int):
            link = self.links[link]
        return self.link_between(link.dst, link.src)

    def describe(self, link: DirectedLink | int) -> str:
        if isinstance(link, int):
            link = self.links[link]
        return f"{self.label(link.src)}->{self.label(link.dst)}"

    def degree(self, node_id: int) -> int:
        return len(self._out.get(node_id, ()))


def build_graph(
    nodes: Iterable[str],
    edges: Iterable[tuple[str, str] | list[str]],
    max_degree: int | None = None,
) -> NetworkGraph:
    """Build a graph with two directed links per undirected edge.

    Link ids follow the sorted (min endpoint, max endpoint) order of the edges,
    forward direction (lower node id first) before the reverse one.
    """
    labels = list(nodes)
    if len(set(labels)) != len(labels):
        raise TopologyError(f"duplicate node labels in {labels}")
    index = {label: i for i, label in enumerate(labels)}
    pairs: set[tuple[int, int]] = set()
    for edge in edges:
        if len(edge) != 2:
            raise TopologyError(f"edge must name two nodes: {edge!r}")
        a, b = edge
        for end in (a, b):
            if end not in index:
                raise UnknownEndpoint(f"edge {a}-{b} names unknown node {end!r}")
        if a == b:
            raise SelfLoop(f"self-loop on {a}")
        key = (min(index[a], index[b]), max(index[a], index[b]))
        if key in pairs:
            raise DuplicateEdge(f"duplicate edge {a}-{b}")
        pairs.add(key)
    links: list[DirectedLink] = []
    for u, v in sorted(pairs):
        links.append(DirectedLink(len(links), u, v))
        links.append(DirectedLink(len(links), v, u))
    graph = NetworkGraph(
        nodes=tuple(Node(i, label) for i, label in enumerate(labels)),
        links=tuple(links),
        max_degree=max_degree,
    )
    if max_degree is not None:
        over = [n.label for n in graph.nodes if graph.degree(n.id) > max_degree]
        if over:
            raise TopologyError(f"nodes {over} exceed port bound M={max_degree}")
    return graph


def outgoing_links(graph: NetworkGraph, node: int | str) -> list[DirectedLink]:
    return list(graph.adjacency[graph.node(node).id])


def validate(graph: NetworkGraph) -> list[Violation]:
    violations: list[Violation] = []
    node_ids = {n.id for n in graph.nodes}
    labels = [n.label for n in graph.nodes]
    if len(set(labels)) != len(labels):
        violations.append(Violation("DuplicateNode", ",".join(sorted(labels))))

    def name(link: DirectedLink) -> str:
        return _link_name(graph, link)

    seen_pairs: set[tuple[int, int]] = set()
    pairs = {(l.src, l.dst) for l in graph.links}
    for pos, link in enumerate(graph.links):
        if link.id != pos:
            violations.append(Violation("LinkIdOrder", name(link)))
        if link.src not in node_ids or link.dst not in node_ids:
            violations.append(Violation("UnknownEndpoint", name(link)))
            continue
        if link.src == link.dst:
            violations.append(Violation("SelfLoop", name(link)))
            continue
        if (link.src, link.dst) in seen_pairs:
            violations.append(Violation("DuplicateLink", name(link)))
        seen_pairs.add((link.src, link.dst))
        if (link.dst, link.src) not in pairs:
            violations.append(Violation("MissingReverse", name(link)))
    for node in graph.nodes:
        listed = graph.adjacency.get(node.id, ())
        expected = [l for l in graph.links if l.src == node.id]
        if sorted(l.id for l in listed) != sorted(l.id for l in expected):
            violations.append(Violation("AdjacencyMismatch", node.label))
        if graph.max_degree is not None and len(listed) > graph.max_degree:
            violations.append(Violation("DegreeExceeded", node.label))
    return violations


def _link_name(graph: NetworkGraph, link: DirectedLink) -> str:
    def lab(i: int) -> str:
        return graph.nodes[i].label if 0 <= i < len(graph.nodes) else f"#{i}"

    return f"{lab(link.src)}->{lab(link.dst)}"


# -- documents ---------------------------------------------------------------

_DOC_KEYS = {"nodes", "edges", "max_degree"}


def graph_from_document(doc: Mapping[str, Any]) -> NetworkGraph:
    if not isinstance(doc, Mapping):
        raise TopologyError("topology document must be an object")
    unknown = set(doc) - _DOC_KEYS
    if unknown:
        raise TopologyError(f"unknown topology fields: {sorted(unknown)}")
    if "nodes" not in doc or "edges" not in doc:
        raise TopologyError("topology document needs 'nodes' and 'edges'")
    nodes = doc["nodes"]
    if not isinstance(nodes, list) or not all(isinstance(n, str) for n in nodes):
        raise TopologyError("'nodes' must be a list of labels")
    edges = doc["edges"]
    if not isinstance(edges, list) or not all(
        isinstance(e, list) and all(isinstance(x, str) for x in e) for e in edges
    ):
        raise TopologyError("'edges' must be a list of label pairs")
    max_degree = doc.get("max_degree")
    if max_degree is not None and (not isinstance(max_degree, int) or max_degree < 1):
        raise TopologyError("'max_degree' must be a positive integer")
    return build_graph(nodes, edges, max_degree=max_degree)


def graph_to_document(graph: NetworkGraph) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "nodes": [n.label for n in graph.nodes],
        "edges": [
            [graph.label(l.src), graph.label(l.dst)] for l in graph.links if l.src < l.dst
        ],
    }
    if graph.max_degree is not None:
        doc["max_degree"] = graph.max_degree
    return doc


def load_topology(path: str | Path) -> NetworkGraph:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise TopologyError(f"cannot read topology {path}: {exc}") from exc
    return graph_from_document(doc)


BUILTINS: dict[str, dict[str, Any]] = {
    # Two endpoints on either side of one routing node.
    "single-switch": {"nodes": ["S", "R", "D"], "edges": [["S", "R"], ["R", "D"]]},
    "ring5": {
        "nodes": ["A", "B", "C", "D", "E"],
        "edges": [["A", "B"], ["B", "C"], ["C", "D"], ["D", "E"], ["E", "A"]],
    },
}


def builtin_topology(name: str) -> NetworkGraph:
    try:
        doc = BUILTINS[name]
    except KeyError:
        raise TopologyError(
            f"unknown builtin topology {name!r}; choose from {sorted(BUILTINS)}"
        ) from None
    return graph_from_document(doc)


def random_connected_graph(n: int, seed: int, extra_edge_prob: float = 0.3) -> NetworkGraph:
    """Random spanning tree plus independent extra edges; always connected."""
    if n < 2:
        raise TopologyError("need at least two nodes")
    rng = random.Random(seed)
    labels = [chr(ord("A") + i) if i < 26 else f"N{i}" for i in range(n)]
    order = list(range(n))
    rng.shuffle(order)
    edges = set()
    for i in range(1, n):
        a, b = order[i], order[rng.randrange(i)]
        edges.add((min(a, b), max(a, b)))
    for a in range(n):
        for b in range(a + 1, n):
            if (a, b) not in edges and rng.random() < extra_edge_prob:
                edges.add((a, b))
    return build_graph(labels, [(labels[a], labels[b]) for a, b in sorted(edges)])
