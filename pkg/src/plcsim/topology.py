"""Powerline graphs: couplers joined by cable segments, some of them switches."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Hashable, Iterable

Node = Hashable


def node_key(n: Node) -> tuple:
    # ints before strings, each in natural order
    return (isinstance(n, str), n)


@dataclass(frozen=True)
class Edge:
    edge_id: str
    a: Node
    b: Node
    length_m: float
    is_switch: bool = False
    switch_open: bool = False

    @property
    def closed(self) -> bool:
        return not self.switch_open


@dataclass(frozen=True)
class ComponentPartition:
    components: tuple[frozenset, ...]
    index: dict = field(compare=False)

    def __len__(self) -> int:
        return len(self.components)

    def same(self, a: Node, b: Node) -> bool:
        return self.index[a] == self.index[b]


@dataclass(frozen=True)
class PowerlineGraph:
    """Immutable coupler graph. ``open_switch`` returns a new version."""

    nodes: tuple
    edges: tuple[Edge, ...]
    graph_id: str = "plc"

    def __post_init__(self) -> None:
        nodes = tuple(sorted(set(self.nodes), key=node_key))
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", tuple(self.edges))
        known = set(nodes)
        seen_ids = set()
        for e in self.edges:
            if e.edge_id in seen_ids:
                raise ValueError(f"duplicate edge id {e.edge_id!r}")
            seen_ids.add(e.edge_id)
            if e.a == e.b:
                raise ValueError(f"edge {e.edge_id!r} is a self-loop")
            if e.a not in known or e.b not in known:
                raise ValueError(f"edge {e.edge_id!r} references an unknown node")
            if not e.length_m > 0:
                raise ValueError(f"edge {e.edge_id!r} needs a positive length")
            if e.switch_open and not e.is_switch:
                raise ValueError(f"edge {e.edge_id!r} is open but not a switch")

    @classmethod
    def build(cls, edges: Iterable[tuple], nodes: Iterable[Node] = (), graph_id: str = "plc") -> PowerlineGraph:
        """Convenience constructor from ``(a, b, length)`` or ``(id, a, b, length, ...)`` tuples."""
        out = []
        node_set = set(nodes)
        for i, e in enumerate(edges):
            if isinstance(e, Edge):
                out.append(e)
            elif len(e) == 3:
                out.append(Edge(f"e{i}", e[0], e[1], float(e[2])))
            else:
                out.append(Edge(*e))
            node_set.update((out[-1].a, out[-1].b))
        return cls(tuple(node_set), tuple(out), graph_id)

    @cached_property
    def _edge_by_id(self) -> dict[str, Edge]:
        return {e.edge_id: e for e in self.edges}

    @cached_property
    def adjacency(self) -> dict[Node, list[tuple[Node, float]]]:
        """Neighbor lists over closed edges; parallel cables keep the shortest."""
        best: dict[tuple, float] = {}
        for e in self.edges:
            if e.switch_open:
                continue
            key = (e.a, e.b) if node_key(e.a) <= node_key(e.b) else (e.b, e.a)
            if key not in best or e.length_m < best[key]:
                best[key] = e.length_m
        adj: dict[Node, list[tuple[Node, float]]] = {n: [] for n in self.nodes}
        for (a, b), w in best.items():
            adj[a].append((b, w))
            adj[b].append((a, w))
        for n in adj:
            adj[n].sort(key=lambda nw: node_key(nw[0]))
        return adj

    def edge(self, edge_id: str) -> Edge:
        try:
            return self._edge_by_id[edge_id]
        except KeyError:
            raise KeyError(f"graph {self.graph_id!r} has no edge {edge_id!r}") from None

    def has_edge(self, edge_id: str) -> bool:
        return edge_id in self._edge_by_id

    def _check_node(self, n: Node) -> None:
        if n not in self.adjacency:
            raise KeyError(f"graph {self.graph_id!r} has no node {n!r}")


class _DisjointSet:
    def __init__(self, items: Iterable[Node]):
        self.parent = {x: x for x in items}

    def find(self, x: Node) -> Node:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: Node, b: Node) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        # keep the smaller id as root so roots are reproducible
        if node_key(rb) < node_key(ra):
            ra, rb = rb, ra
        self.parent[rb] = ra


def connected_components(g: PowerlineGraph) -> ComponentPartition:
    """Components over closed edges, ordered by their smallest node id."""
    ds = _DisjointSet(g.nodes)
    for e in g.edges:
        if not e.switch_open:
            ds.union(e.a, e.b)
    groups: dict[Node, list[Node]] = {}
    for n in g.nodes:
        groups.setdefault(ds.find(n), []).append(n)
    ordered = sorted(groups.values(), key=lambda members: node_key(members[0]))
    comps = tuple(frozenset(m) for m in ordered)
    index = {n: i for i, members in enumerate(ordered) for n in members}
    return ComponentPartition(comps, index)


def distances_from(g: PowerlineGraph, source: Node) -> dict[Node, float]:
    """Dijkstra from ``source``; unreachable nodes are absent from the result."""
    g._check_node(source)
    adj = g.adjacency
    dist = {source: 0.0}
    heap = [(0.0, node_key(source), source)]
    done = set()
    while heap:
        d, _, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, w in adj[u]:
            nd = d + w
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, node_key(v), v))
    return dist


def shortest_path_distance(g: PowerlineGraph, a: Node, b: Node) -> float | None:
    """Cable length of the shortest closed path, or ``None`` if unreachable."""
    g._check_node(b)
    return distances_from(g, a).get(b)


def open_switch(g: PowerlineGraph, edge_id: str) -> PowerlineGraph:
    e = g.edge(edge_id)
    if not e.is_switch:
        raise ValueError(f"edge {edge_id!r} is a plain cable, not a switch")
    if e.switch_open:
        return g
    edges = tuple(replace(x, switch_open=True) if x.edge_id == edge_id else x for x in g.edges)
    return replace(g, edges=edges)
