"""Heavy-duty EV state machine, arrivals, routing and charging decisions.

A vehicle is always in exactly one of four states: ``Moving`` along a road
edge, ``Charging`` at a station port, ``Idle`` (waiting at a station) or
``Departed``. Battery energy only goes down while moving and only goes up while
charging.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Hashable, Iterable, Mapping, Union

import numpy as np

from gridhaul.road import RoadGraph, shortest_path

# lets tiny float drift count as a full battery / an exhausted one
_KWH_EPS = 1e-9


@dataclass(frozen=True)
class HdevParams:
    capacity_kwh: float = 900.0
    consumption_kwh_per_mile: float = 2.0
    speed_mph: float = 60.0
    charge_kw: float = 150.0
    reserve_fraction: float = 0.1

    def __post_init__(self):
        for name in ("capacity_kwh", "consumption_kwh_per_mile", "speed_mph", "charge_kw"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be a positive number, got {value}")
        if not 0 <= self.reserve_fraction < 1:
            raise ValueError(f"reserve_fraction must be in [0, 1), got {self.reserve_fraction}")
        if not 75 <= self.charge_kw <= 600:
            warnings.warn(
                f"charge_kw={self.charge_kw} is outside the 75-600 kW range typical of heavy-duty chargers",
                stacklevel=3,
            )


@dataclass(frozen=True)
class Moving:
    edge: tuple  # (from node, to node)
    miles_remaining: float


@dataclass(frozen=True)
class Charging:
    station_id: Hashable


@dataclass(frozen=True)
class Idle:
    station_id: Hashable


@dataclass(frozen=True)
class Departed:
    reason: str = "arrived"  # or "stranded"

    @property
    def stranded(self) -> bool:
        return self.reason == "stranded"


State = Union[Moving, Charging, Idle, Departed]


@dataclass(frozen=True)
class Hdev:
    id: int
    params: HdevParams
    soc_kwh: float
    state: State
    node: Hashable  # last road node reached
    destination: Hashable
    itinerary: tuple = ()  # nodes still to visit, destination last

    @property
    def needed_kwh(self) -> float:
        return self.params.capacity_kwh - self.soc_kwh

    @property
    def in_system(self) -> bool:
        return not isinstance(self.state, Departed)


class EventKind(str, enum.Enum):
    ARRIVED_AT_NODE = "arrived-at-node"
    FULLY_CHARGED = "fully-charged"
    DEPARTED = "departed"
    STRANDED = "stranded"
    CHARGE_REQUEST = "charge-request"


@dataclass(frozen=True)
class Event:
    vehicle_id: int
    kind: EventKind
    node: Hashable = None
    detail: str = ""


@dataclass(frozen=True)
class StepOutcome:
    vehicle: Hdev
    events: list
    leftover_hours: float = 0.0


class Decision(str, enum.Enum):
    PROCEED = "proceed"
    CHARGE_FIRST = "charge-first"


def charging_decision(vehicle: Hdev, next_leg_miles: float) -> Decision:
    """Charge first iff the battery can't cover the next leg plus the reserve."""
    if next_leg_miles < 0:
        raise ValueError(f"next_leg_miles must be >= 0, got {next_leg_miles}")
    p = vehicle.params
    need = next_leg_miles * p.consumption_kwh_per_mile + p.reserve_fraction * p.capacity_kwh
    return Decision.CHARGE_FIRST if vehicle.soc_kwh < need else Decision.PROCEED


def step_vehicle(vehicle: Hdev, dt_hours: float) -> StepOutcome:
    """Advance one vehicle by ``dt_hours`` along its current edge or charger.

    Reaching the end of an edge emits ``arrived-at-node`` with the unused time
    in ``leftover_hours``; the caller decides what happens at the node.
    """
    if not dt_hours > 0:
        raise ValueError(f"dt_hours must be > 0, got {dt_hours}")
    state = vehicle.state
    p = vehicle.params
    if isinstance(state, Moving):
        reach = p.speed_mph * dt_hours
        miles = min(reach, state.miles_remaining)
        energy = miles * p.consumption_kwh_per_mile
        if energy > vehicle.soc_kwh + _KWH_EPS:
            # battery runs out mid-edge
            v = replace(vehicle, soc_kwh=0.0, state=Departed("stranded"))
            return StepOutcome(v, [Event(vehicle.id, EventKind.STRANDED, state.edge[1], "battery exhausted")])
        soc = max(vehicle.soc_kwh - energy, 0.0)
        remaining = state.miles_remaining - miles
        if remaining <= 0 or reach >= state.miles_remaining:
            leftover = dt_hours - miles / p.speed_mph
            v = replace(vehicle, soc_kwh=soc, state=Moving(state.edge, 0.0), node=state.edge[1])
            return StepOutcome(v, [Event(vehicle.id, EventKind.ARRIVED_AT_NODE, state.edge[1])], max(leftover, 0.0))
        return StepOutcome(replace(vehicle, soc_kwh=soc, state=Moving(state.edge, remaining)), [])
    if isinstance(state, Charging):
        soc = vehicle.soc_kwh + p.charge_kw * dt_hours
        if soc >= p.capacity_kwh - _KWH_EPS:
            v = replace(vehicle, soc_kwh=p.capacity_kwh)
            return StepOutcome(v, [Event(vehicle.id, EventKind.FULLY_CHARGED, state.station_id)])
        return StepOutcome(replace(vehicle, soc_kwh=soc), [])
    return StepOutcome(vehicle, [])


@dataclass(frozen=True)
class RouteAudit:
    vehicle_id: int
    origin: Hashable
    destination: Hashable
    reason: str


def plan_route(vehicle: Hdev, graph: RoadGraph) -> tuple[Hdev, RouteAudit | None]:
    """Fill the itinerary with the shortest path from the vehicle's node.

    A vehicle already at its destination departs; one that can't reach it is
    marked stranded and an audit record is returned.
    """
    if isinstance(vehicle.state, Departed):
        raise ValueError(f"vehicle {vehicle.id} has already departed")
    if vehicle.node == vehicle.destination:
        return replace(vehicle, itinerary=(), state=Departed("arrived")), None
    route = shortest_path(graph, vehicle.node, vehicle.destination)
    if not route.found:
        audit = RouteAudit(vehicle.id, vehicle.node, vehicle.destination, "destination unreachable")
        return replace(vehicle, itinerary=(), state=Departed("stranded")), audit
    return replace(vehicle, itinerary=tuple(route.path[1:])), None


@dataclass(frozen=True)
class ArrivalProcess:
    rate_per_hour: float
    entry_weights: Mapping  # road node -> weight
    destination_weights: Mapping

    def __post_init__(self):
        if not self.rate_per_hour >= 0:
            raise ValueError(f"rate_per_hour must be >= 0, got {self.rate_per_hour}")
        for name in ("entry_weights", "destination_weights"):
            w = getattr(self, name)
            if any(x < 0 for x in w.values()) or not any(x > 0 for x in w.values()):
                raise ValueError(f"{name} must be non-negative and not all zero")

    @classmethod
    def uniform(cls, rate_per_hour: float, nodes: Iterable) -> "ArrivalProcess":
        nodes = list(nodes)
        w = {n: 1.0 for n in nodes}
        return cls(rate_per_hour, w, dict(w))


def _categorical(weights: Mapping):
    keys = list(weights)
    w = np.array([float(weights[k]) for k in keys])
    return keys, w / w.sum()


class IdSource:
    def __init__(self, start: int = 0):
        self.next = start

    def __call__(self) -> int:
        out = self.next
        self.next += 1
        return out


def new_vehicle(
    vid: int, params: HdevParams, start, destination, rng: np.random.Generator, soc_kwh: float | None = None
) -> Hdev:
    if soc_kwh is None:
        soc_kwh = rng.uniform(0.5, 1.0) * params.capacity_kwh
    return Hdev(vid, params, float(soc_kwh), Idle(start), start, destination)


def spawn_arrivals(
    process: ArrivalProcess,
    dt_hours: float,
    rng: np.random.Generator,
    params: HdevParams | None = None,
    ids: IdSource | None = None,
    count: int | None = None,
) -> list[Hdev]:
    """New vehicles for one interval: Poisson count, sampled start and destination.

    Destinations are resampled until they differ from the start. ``count``
    overrides the Poisson draw (used for the initial fleet).
    """
    if not dt_hours > 0:
        raise ValueError(f"dt_hours must be > 0, got {dt_hours}")
    params = params or HdevParams()
    ids = ids or IdSource()
    n = int(rng.poisson(process.rate_per_hour * dt_hours)) if count is None else int(count)
    if n == 0:
        return []
    entries, pe = _categorical(process.entry_weights)
    dests, pd = _categorical(process.destination_weights)
    out = []
    for _ in range(n):
        start = entries[rng.choice(len(entries), p=pe)]
        if all(d == start or process.destination_weights[d] <= 0 for d in dests):
            raise ValueError(f"no destination other than the entry node {start!r} has positive weight")
        while True:
            dest = dests[rng.choice(len(dests), p=pd)]
            if dest != start:
                break
        out.append(new_vehicle(ids(), params, start, dest, rng))
    return out


@dataclass
class FleetCounters:
    arrived: int = 0  # vehicles that entered the system
    departed: int = 0
    stranded: int = 0


@dataclass
class VehicleManager:
    """Owns every vehicle in the system and moves them over the road graph.

    Station-side effects are not applied here; they come back as
    ``charge-request`` and ``fully-charged`` events for the engine to route to
    the stations.
    """

    graph: RoadGraph
    chargeable: set = field(default_factory=set)  # road nodes with a station
    vehicles: dict = field(default_factory=dict)
    counters: FleetCounters = field(default_factory=FleetCounters)
    audits: list = field(default_factory=list)

    def add(self, vehicle: Hdev) -> list[Event]:
        self.counters.arrived += 1
        self.vehicles[vehicle.id] = vehicle
        planned, audit = plan_route(vehicle, self.graph)
        if audit is not None:
            self.audits.append(audit)
        self.vehicles[vehicle.id] = planned
        if isinstance(planned.state, Departed):
            return self._retire(planned)
        return self.dispatch(planned.id)

    def _retire(self, vehicle: Hdev, emit: bool = True) -> list[Event]:
        del self.vehicles[vehicle.id]
        if vehicle.state.stranded:
            self.counters.stranded += 1
            kind = EventKind.STRANDED
        else:
            self.counters.departed += 1
            kind = EventKind.DEPARTED
        return [Event(vehicle.id, kind, vehicle.node)] if emit else []

    def dispatch(self, vid: int, hours: float = 0.0) -> list[Event]:
        """Decide what a vehicle standing at a node does next.

        Leaves (at destination), asks to charge, or sets off on the next
        edge and uses up ``hours`` of travel time.
        """
        v = self.vehicles[vid]
        if v.node == v.destination or not v.itinerary:
            v = replace(v, state=Departed("arrived"), itinerary=())
            self.vehicles[vid] = v
            return self._retire(v)
        nxt = v.itinerary[0]
        leg = self.graph.adjacency[v.node][nxt]
        full = v.soc_kwh >= v.params.capacity_kwh - _KWH_EPS
        if v.node in self.chargeable and not full and charging_decision(v, leg) is Decision.CHARGE_FIRST:
            self.vehicles[vid] = replace(v, state=Idle(v.node))
            return [Event(vid, EventKind.CHARGE_REQUEST, v.node)]
        v = replace(v, state=Moving((v.node, nxt), leg), itinerary=v.itinerary[1:])
        self.vehicles[vid] = v
        if hours > 0:
            return self.advance(vid, hours)
        return []

    def advance(self, vid: int, hours: float) -> list[Event]:
        events: list[Event] = []
        while hours > 0 and vid in self.vehicles:
            outcome = step_vehicle(self.vehicles[vid], hours)
            v = outcome.vehicle
            self.vehicles[vid] = v
            events += outcome.events
            if isinstance(v.state, Departed):
                # step_vehicle already emitted the stranded event
                self._retire(v, emit=False)
                break
            if not any(e.kind is EventKind.ARRIVED_AT_NODE for e in outcome.events):
                break
            # remaining time rolls into the next edge
            hours = outcome.leftover_hours
            events += self.dispatch(vid)
            if vid not in self.vehicles or not isinstance(self.vehicles[vid].state, Moving):
                break
        return events

    def step_all(self, dt_hours: float) -> list[Event]:
        events: list[Event] = []
        for vid in sorted(self.vehicles):
            if vid in self.vehicles:
                events += self.advance(vid, dt_hours)
        return events

    def set_state(self, vid: int, state: State) -> None:
        self.vehicles[vid] = replace(self.vehicles[vid], state=state)

    def counts(self) -> dict[str, int]:
        out = {"charging": 0, "idle": 0, "moving": 0}
        for v in self.vehicles.values():
            if isinstance(v.state, Charging):
                out["charging"] += 1
            elif isinstance(v.state, Idle):
                out["idle"] += 1
            elif isinstance(v.state, Moving):
                out["moving"] += 1
        return out

    def check_conservation(self) -> None:
        c = self.counters
        if c.arrived != c.departed + c.stranded + len(self.vehicles):
            raise RuntimeError(
                f"vehicle conservation broken: {c.arrived} arrived != {c.departed} departed + "
                f"{c.stranded} stranded + {len(self.vehicles)} in system"
            )
