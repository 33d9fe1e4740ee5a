"""Undirected road graph between charging-station locations.

Routing is Dijkstra over miles with a deterministic tie-break: among all
minimum-mile routes, the lexicographically smallest node-id sequence wins.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Sequence

from gridhaul._files import FileFormatError, read_json, root

NodeId = Hashable

# relative slack when comparing floating-point route lengths
_EPS = 1e-9


class NotAdjacentError(ValueError):
    def __init__(self, a, b):
        self.pair = (a, b)
        super().__init__(f"nodes {a!r} and {b!r} are not adjacent")


@dataclass(frozen=True)
class RoadNode:
    id: NodeId
    bus_id: int | None = None
    lat: float | None = None
    lon: float | None = None


@dataclass(frozen=True)
class Route:
    path: list
    miles: float

    @property
    def found(self) -> bool:
        return bool(self.path)


NO_PATH = Route([], math.inf)


@dataclass
class RoadGraph:
    nodes: dict
    adjacency: dict = field(repr=False)
    _to_dest: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @classmethod
    def build(cls, nodes: Sequence[RoadNode | NodeId], edges: Sequence[tuple]) -> "RoadGraph":
        """Build from nodes and ``(a, b, miles)`` edges, checking the invariants."""
        table = {}
        for n in nodes:
            n = n if isinstance(n, RoadNode) else RoadNode(n)
            if n.id in table:
                raise ValueError(f"duplicate road node {n.id!r}")
            table[n.id] = n
        adj: dict = {nid: {} for nid in table}
        for a, b, miles in edges:
            if a not in table or b not in table:
                missing = a if a not in table else b
                raise ValueError(f"edge ({a!r}, {b!r}) references unknown node {missing!r}")
            if a == b:
                raise ValueError(f"self-loop at node {a!r}")
            miles = float(miles)
            if not (miles > 0 and math.isfinite(miles)):
                raise ValueError(f"edge ({a!r}, {b!r}) must have finite miles > 0, got {miles}")
            if b in adj[a]:
                # parallel roads: keep the shorter one
                miles = min(miles, adj[a][b])
            adj[a][b] = miles
            adj[b][a] = miles
        return cls(table, adj)

    def __contains__(self, node) -> bool:
        return node in self.nodes

    def neighbors(self, node) -> dict:
        return self.adjacency[node]

    def edges(self) -> list[tuple]:
        out = []
        for a, nbrs in self.adjacency.items():
            for b, miles in nbrs.items():
                if _order_key(a) < _order_key(b):
                    out.append((a, b, miles))
        return sorted(out, key=lambda e: (_order_key(e[0]), _order_key(e[1])))

    def distances_to(self, dest) -> dict:
        """Shortest miles from every reachable node to ``dest`` (cached)."""
        cached = self._to_dest.get(dest)
        if cached is not None:
            return cached
        dist = {dest: 0.0}
        heap = [(0.0, _order_key(dest), dest)]
        done = set()
        while heap:
            d, _, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            for v, w in self.adjacency[u].items():
                nd = d + w
                if nd < dist.get(v, math.inf):
                    dist[v] = nd
                    heapq.heappush(heap, (nd, _order_key(v), v))
        self._to_dest[dest] = dist
        return dist

    def max_edge_miles(self) -> float:
        return max((m for nbrs in self.adjacency.values() for m in nbrs.values()), default=0.0)


def _order_key(node):
    # mixed int/str ids still need a total order
    return (0, node, "") if isinstance(node, (int, float)) else (1, 0, str(node))


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= _EPS * max(1.0, abs(a), abs(b))


def shortest_path(graph: RoadGraph, origin, dest) -> Route:
    """Minimum-mile route from ``origin`` to ``dest``; ``NO_PATH`` if unreachable."""
    for node in (origin, dest):
        if node not in graph:
            raise KeyError(f"unknown road node {node!r}")
    if origin == dest:
        return Route([origin], 0.0)
    to_dest = graph.distances_to(dest)
    if origin not in to_dest:
        return NO_PATH
    path = [origin]
    u = origin
    while u != dest:
        # smallest-id neighbour that stays on some shortest route
        step = min(
            (v for v, w in graph.adjacency[u].items() if v in to_dest and _close(w + to_dest[v], to_dest[u])),
            key=_order_key,
        )
        path.append(step)
        u = step
    return Route(path, sum(leg_distances(graph, path)))


def leg_distances(graph: RoadGraph, path: Sequence) -> list[float]:
    out = []
    for a, b in zip(path, path[1:]):
        try:
            out.append(graph.adjacency[a][b])
        except KeyError:
            raise NotAdjacentError(a, b) from None
    return out


def load_road(path: str | Path) -> RoadGraph:
    """Read a road file: ``nodes`` (id, bus_id, optional lat/lon) and ``edges`` (a, b, miles)."""
    doc = root(read_json(path), path)
    nodes = [
        RoadNode(
            id=item.get("id", "id"),
            bus_id=item.get("bus_id", "int", None),
            lat=item.get("lat", default=None),
            lon=item.get("lon", default=None),
        )
        for item in doc.items("nodes")
    ]
    edges = []
    ids = {n.id for n in nodes}
    for item in doc.items("edges"):
        a, b = item.get("a", "id"), item.get("b", "id")
        for key, val in (("a", a), ("b", b)):
            if val not in ids:
                raise item.fail(key, f"unknown node {val!r}")
        miles = item.get("miles")
        if not miles > 0:
            raise item.fail("miles", f"must be > 0, got {miles}")
        if a == b:
            raise item.fail("b", "self-loop")
        edges.append((a, b, miles))
    try:
        return RoadGraph.build(nodes, edges)
    except ValueError as exc:
        raise FileFormatError(f"{path}: {exc}") from None


def road_to_dict(graph: RoadGraph) -> dict:
    nodes = []
    for n in graph.nodes.values():
        d = {"id": n.id}
        if n.bus_id is not None:
            d["bus_id"] = n.bus_id
        if n.lat is not None:
            d["lat"] = n.lat
        if n.lon is not None:
            d["lon"] = n.lon
        nodes.append(d)
    return {"nodes": nodes, "edges": [{"a": a, "b": b, "miles": m} for a, b, m in graph.edges()]}
