"""Radial feeder power flow by forward-backward sweep.

Balanced positive-sequence model with constant-power loads. Node loads are
given in kW/kVAr; line impedances in ohms or per-unit depending on the
feeder's ``impedance_unit``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from gridhaul._files import read_json, root
from gridhaul.analytics import ViolationBand, count_violations
from gridhaul.grid import Branch, Bus, BusKind, Network

DEFAULT_VEHICLE_KW = 150.0


class RadialityError(ValueError):
    pass


class CycleError(RadialityError):
    def __init__(self, edge):
        self.edge = edge
        super().__init__(f"feeder is not radial: line {edge[0]!r}-{edge[1]!r} closes a loop")


class DisconnectedError(RadialityError):
    def __init__(self, node):
        self.node = node
        super().__init__(f"feeder is not radial: node {node!r} is not reachable from the source")


@dataclass(frozen=True)
class FeederNode:
    id: int
    load_p: float = 0.0  # kW
    load_q: float = 0.0  # kVAr


@dataclass(frozen=True)
class FeederLine:
    from_node: int
    to_node: int
    r: float
    x: float


@dataclass(frozen=True)
class Feeder:
    source: int
    nodes: tuple[FeederNode, ...]
    lines: tuple[FeederLine, ...]
    source_v: float = 1.0
    base_kv: float = 12.47
    base_mva: float = 1.0
    impedance_unit: str = "pu"  # "pu" or "ohm"
    candidate_station_nodes: tuple[int, ...] | None = None
    id: str = "feeder"

    def __post_init__(self):
        if self.impedance_unit not in ("pu", "ohm"):
            raise ValueError(f"impedance_unit must be 'pu' or 'ohm', got {self.impedance_unit!r}")
        if not (self.base_kv > 0 and self.base_mva > 0):
            raise ValueError("base_kv and base_mva must be > 0")

    @property
    def z_base(self) -> float:
        return self.base_kv**2 / self.base_mva

    @property
    def node_ids(self) -> list[int]:
        return [n.id for n in self.nodes]

    def candidates(self) -> list[int]:
        if self.candidate_station_nodes is not None:
            return list(self.candidate_station_nodes)
        return [n.id for n in self.nodes if n.id != self.source]

    def line_z_pu(self, line: FeederLine) -> complex:
        z = complex(line.r, line.x)
        return z / self.z_base if self.impedance_unit == "ohm" else z

    def scaled(self, load_factor: float) -> "Feeder":
        nodes = tuple(FeederNode(n.id, n.load_p * load_factor, n.load_q * load_factor) for n in self.nodes)
        return replace(self, nodes=nodes)

    def total_load_kw(self) -> float:
        return sum(n.load_p for n in self.nodes)


@dataclass(frozen=True)
class RadialOrder:
    forward: list  # source first; every parent precedes its children
    parent: dict  # node -> (parent node, line index); source absent

    @property
    def backward(self) -> list:
        return self.forward[::-1]


def order_radial(feeder: Feeder) -> RadialOrder:
    """Breadth-first order from the source, rejecting loops and islands."""
    ids = set(feeder.node_ids)
    if feeder.source not in ids:
        raise DisconnectedError(feeder.source)
    adj: dict = {n: [] for n in feeder.node_ids}
    for k, line in enumerate(feeder.lines):
        for end in (line.from_node, line.to_node):
            if end not in ids:
                raise ValueError(f"line {line.from_node!r}-{line.to_node!r} references unknown node {end!r}")
        adj[line.from_node].append((line.to_node, k))
        adj[line.to_node].append((line.from_node, k))
    parent: dict = {}
    seen = {feeder.source}
    used_lines: set[int] = set()
    order = [feeder.source]
    queue = deque([feeder.source])
    while queue:
        u = queue.popleft()
        for v, k in adj[u]:
            if k in used_lines:
                continue
            used_lines.add(k)
            if v in seen:
                line = feeder.lines[k]
                raise CycleError((line.from_node, line.to_node))
            seen.add(v)
            parent[v] = (u, k)
            order.append(v)
            queue.append(v)
    for n in feeder.node_ids:
        if n not in seen:
            raise DisconnectedError(n)
    return RadialOrder(order, parent)


@dataclass(frozen=True)
class StationPlacement:
    station_nodes: tuple[int, ...] = ()
    vehicles_per_station: tuple[int, ...] = ()
    per_vehicle_kw: float = DEFAULT_VEHICLE_KW
    reactive_fraction: float = 0.0  # kVAr per kW drawn

    def __post_init__(self):
        object.__setattr__(self, "station_nodes", tuple(self.station_nodes))
        object.__setattr__(self, "vehicles_per_station", tuple(int(c) for c in self.vehicles_per_station))
        if len(self.station_nodes) != len(self.vehicles_per_station):
            raise ValueError("station_nodes and vehicles_per_station must have equal length")
        if any(c < 0 for c in self.vehicles_per_station):
            raise ValueError("vehicle counts must be non-negative")
        if not self.per_vehicle_kw >= 0:
            raise ValueError("per_vehicle_kw must be >= 0")

    @property
    def n_vehicles(self) -> int:
        return sum(self.vehicles_per_station)

    def station_loads(self) -> dict[int, complex]:
        """Added load per node, kW + j kVAr."""
        out: dict[int, complex] = {}
        for node, count in zip(self.station_nodes, self.vehicles_per_station):
            p = count * self.per_vehicle_kw
            out[node] = out.get(node, 0j) + complex(p, p * self.reactive_fraction)
        return out


@dataclass
class FbsResult:
    node_ids: list[int]
    voltage: np.ndarray  # complex pu, node order
    converged: bool
    iterations: int
    max_change: float
    line_current: np.ndarray = field(repr=False, default=None)  # pu, line order

    @property
    def v_mag(self) -> np.ndarray:
        return np.abs(self.voltage)

    def voltages(self) -> dict[int, float]:
        return dict(zip(self.node_ids, self.v_mag.tolist()))


def node_loads_pu(feeder: Feeder, placement: StationPlacement | None) -> np.ndarray:
    """Complex per-unit load per node including station charging."""
    index = {nid: i for i, nid in enumerate(feeder.node_ids)}
    kva_base = feeder.base_mva * 1000.0
    s = np.array([complex(n.load_p, n.load_q) for n in feeder.nodes]) / kva_base
    if placement is not None:
        for node, kva in placement.station_loads().items():
            if node not in index:
                raise KeyError(f"station at unknown feeder node {node!r}")
            s[index[node]] += kva / kva_base
    return s


def solve_fbs(
    feeder: Feeder,
    placement: StationPlacement | None = None,
    tol: float = 1e-10,
    max_iter: int = 100,
    order: RadialOrder | None = None,
) -> FbsResult:
    """Forward-backward sweep until the largest voltage change is below ``tol``."""
    order = order or order_radial(feeder)
    ids = feeder.node_ids
    index = {nid: i for i, nid in enumerate(ids)}
    s_load = node_loads_pu(feeder, placement)
    z_line = np.array([feeder.line_z_pu(line) for line in feeder.lines], dtype=complex)

    n = len(ids)
    src = index[feeder.source]
    # parent position, line index for each non-source node, children before parents
    back = [(index[v], index[order.parent[v][0]], order.parent[v][1]) for v in order.backward if v != feeder.source]
    fwd = back[::-1]

    v = np.full(n, complex(feeder.source_v, 0.0))
    i_line = np.zeros(len(feeder.lines), dtype=complex)
    converged = False
    change = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        i_node = np.conj(s_load / v)
        i_node[src] = 0.0
        acc = i_node.copy()
        for child, par, k in back:
            i_line[k] = acc[child]
            acc[par] += acc[child]
        v_new = v.copy()
        v_new[src] = feeder.source_v
        for child, par, k in fwd:
            v_new[child] = v_new[par] - z_line[k] * i_line[k]
        change = float(np.max(np.abs(v_new - v)))
        v = v_new
        if not np.all(np.isfinite(v)) or np.any(np.abs(v) == 0):
            break
        if change < tol:
            converged = True
            break
    return FbsResult(ids, v, converged, it, change, i_line)


def sample_placement(
    feeder: Feeder,
    n_stations: int,
    n_vehicles: int,
    seed,
    per_vehicle_kw: float = DEFAULT_VEHICLE_KW,
    reactive_fraction: float = 0.0,
) -> StationPlacement:
    """Uniform station sites (without replacement) and a uniform multinomial
    split of vehicles across them."""
    candidates = feeder.candidates()
    if n_stations < 0 or n_vehicles < 0:
        raise ValueError("n_stations and n_vehicles must be non-negative")
    if n_stations > len(candidates):
        raise ValueError(f"cannot place {n_stations} stations on {len(candidates)} candidate nodes")
    if n_stations == 0:
        if n_vehicles:
            raise ValueError("vehicles need at least one station")
        return StationPlacement((), (), per_vehicle_kw, reactive_fraction)
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(candidates), size=n_stations, replace=False)
    counts = rng.multinomial(n_vehicles, np.full(n_stations, 1.0 / n_stations))
    return StationPlacement(
        tuple(candidates[i] for i in picks), tuple(int(c) for c in counts), per_vehicle_kw, reactive_fraction
    )


def feeder_as_network(feeder: Feeder, placement: StationPlacement | None = None) -> Network:
    """Recast a feeder as a transmission case (slack at the source, PQ elsewhere)."""
    s = node_loads_pu(feeder, placement) * feeder.base_mva
    buses = [
        Bus(
            id=n.id,
            kind=BusKind.SLACK if n.id == feeder.source else BusKind.PQ,
            base_kv=feeder.base_kv,
            v_set=feeder.source_v,
            load_p=float(s[i].real) if n.id != feeder.source else 0.0,
            load_q=float(s[i].imag) if n.id != feeder.source else 0.0,
        )
        for i, n in enumerate(feeder.nodes)
    ]
    branches = []
    for line in feeder.lines:
        z = feeder.line_z_pu(line)
        branches.append(Branch(line.from_node, line.to_node, z.real, z.imag))
    return Network(feeder.base_mva, tuple(buses), tuple(branches))


def load_feeder(path: str | Path) -> Feeder:
    """Read a feeder file (``source_v``, ``base_kv``, ``base_mva``, ``nodes``, ``lines``)."""
    doc = root(read_json(path), path)
    nodes = tuple(
        FeederNode(item.get("id", "int"), item.get("load_p", default=0.0), item.get("load_q", default=0.0))
        for item in doc.items("nodes")
    )
    if not nodes:
        raise doc.fail("nodes", "feeder has no nodes")
    ids = {n.id for n in nodes}
    if len(ids) != len(nodes):
        raise doc.fail("nodes", "duplicate node id")
    lines = []
    for item in doc.items("lines"):
        a, b = item.get("from", "int"), item.get("to", "int")
        for key, val in (("from", a), ("to", b)):
            if val not in ids:
                raise item.fail(key, f"unknown node {val!r}")
        lines.append(FeederLine(a, b, item.get("r"), item.get("x")))
    source = doc.get("source", "int", nodes[0].id)
    if source not in ids:
        raise doc.fail("source", f"unknown node {source!r}")
    unit = doc.get("impedance_unit", "str", "pu")
    if unit not in ("pu", "ohm"):
        raise doc.fail("impedance_unit", f"expected 'pu' or 'ohm', got {unit!r}")
    candidates = doc.raw("candidate_station_nodes")
    if candidates is not None:
        if not isinstance(candidates, list) or any(c not in ids for c in candidates):
            raise doc.fail("candidate_station_nodes", "expected a list of existing node ids")
        candidates = tuple(candidates)
    base_kv = doc.get("base_kv")
    base_mva = doc.get("base_mva")
    for key, val in (("base_kv", base_kv), ("base_mva", base_mva)):
        if not val > 0:
            raise doc.fail(key, f"must be > 0, got {val}")
    return Feeder(
        source=source,
        nodes=nodes,
        lines=tuple(lines),
        source_v=doc.get("source_v", default=1.0),
        base_kv=base_kv,
        base_mva=base_mva,
        impedance_unit=unit,
        candidate_station_nodes=candidates,
        id=doc.get("id", "str", Path(path).stem),
    )


def feeder_to_dict(feeder: Feeder) -> dict:
    d = {
        "id": feeder.id,
        "source": feeder.source,
        "source_v": feeder.source_v,
        "base_kv": feeder.base_kv,
        "base_mva": feeder.base_mva,
        "impedance_unit": feeder.impedance_unit,
        "nodes": [{"id": n.id, "load_p": n.load_p, "load_q": n.load_q} for n in feeder.nodes],
        "lines": [{"from": ln.from_node, "to": ln.to_node, "r": ln.r, "x": ln.x} for ln in feeder.lines],
    }
    if feeder.candidate_station_nodes is not None:
        d["candidate_station_nodes"] = list(feeder.candidate_station_nodes)
    return d


def validate_feeder(feeder: Feeder) -> list[str]:
    problems = []
    try:
        order_radial(feeder)
    except (RadialityError, ValueError) as exc:
        problems.append(str(exc))
    for line in feeder.lines:
        if line.r == 0 and line.x == 0:
            problems.append(f"line {line.from_node}-{line.to_node}: zero impedance")
    if not feeder.source_v > 0:
        problems.append(f"source_v must be > 0, got {feeder.source_v}")
    return problems


def violation_count(result: FbsResult, band: ViolationBand | None = None, exclude: Sequence[int] = ()) -> int:
    skip = set(exclude)
    vm = {nid: v for nid, v in result.voltages().items() if nid not in skip}
    return count_violations(vm, band).count


__all__ = [
    "CycleError",
    "DisconnectedError",
    "FbsResult",
    "Feeder",
    "FeederLine",
    "FeederNode",
    "RadialOrder",
    "StationPlacement",
    "feeder_as_network",
    "load_feeder",
    "order_radial",
    "sample_placement",
    "solve_fbs",
]
