"""Charging stations: port assignment, wait queues and aggregate grid load."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Mapping

from gridhaul._files import read_json, root


class PortStrategy(str, enum.Enum):
    FIFO = "fifo"
    SHORTEST_REMAINING_CHARGE = "shortest_remaining_charge"

    @classmethod
    def parse(cls, text: str) -> "PortStrategy":
        key = text.strip().lower().replace("-", "_")
        aliases = {"src": cls.SHORTEST_REMAINING_CHARGE, "shortestremainingcharge": cls.SHORTEST_REMAINING_CHARGE}
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(s.value for s in cls)
            raise ValueError(f"unknown port strategy {text!r}; expected one of {choices}") from None


class StationError(ValueError):
    pass


@dataclass
class ChargingStation:
    id: Hashable
    bus_id: int
    n_ports: int | None = None  # None: as many ports as vehicles
    lat: float | None = None
    lon: float | None = None
    charging_set: list = field(default_factory=list)
    wait_queue: list = field(default_factory=list)
    _seq: dict = field(default_factory=dict, repr=False)
    _counter: int = field(default=0, repr=False)

    def __post_init__(self):
        if self.n_ports is not None and self.n_ports < 1:
            raise StationError(f"station {self.id!r}: n_ports must be >= 1, got {self.n_ports}")

    def __contains__(self, vid) -> bool:
        return vid in self._seq

    @property
    def free_ports(self) -> int | float:
        if self.n_ports is None:
            return float("inf")
        return self.n_ports - len(self.charging_set)

    def enqueue(self, vid) -> None:
        """Put a vehicle at the tail of the wait queue without assigning ports."""
        if vid in self._seq:
            raise StationError(f"vehicle {vid!r} is already at station {self.id!r}")
        self._seq[vid] = self._counter
        self._counter += 1
        self.wait_queue.append(vid)

    def admit(self, vid) -> None:
        """Take a port if one is free, otherwise join the queue."""
        self.enqueue(vid)
        if self.free_ports > 0 and self.wait_queue[0] == vid:
            self.wait_queue.pop(0)
            self.charging_set.append(vid)

    def release(self, vid, promote: bool = True) -> None:
        """Remove a vehicle; the queue head takes its port when ``promote``."""
        if vid not in self._seq:
            raise StationError(f"vehicle {vid!r} is not at station {self.id!r}")
        del self._seq[vid]
        if vid in self.wait_queue:
            self.wait_queue.remove(vid)
            return
        self.charging_set.remove(vid)
        if promote and self.wait_queue and self.free_ports > 0:
            self.charging_set.append(self.wait_queue.pop(0))

    def assign_ports(self, strategy: PortStrategy | str, fleet: Mapping | None = None) -> None:
        assign_ports(strategy, self, fleet)

    def aggregate_power(self, fleet: Mapping) -> float:
        return aggregate_power(self, fleet)


def _charge_kw(entry) -> float:
    # fleet views hold either vehicles or bare kW figures
    if isinstance(entry, (int, float)):
        return float(entry)
    return float(entry.params.charge_kw)


def aggregate_power(station: ChargingStation, fleet: Mapping) -> float:
    """kW drawn by the vehicles on ports; queued vehicles draw nothing."""
    total = 0.0
    for vid in station.charging_set:
        if vid not in fleet:
            raise StationError(f"station {station.id!r}: charging vehicle {vid!r} not found in fleet")
        total += _charge_kw(fleet[vid])
    return total


def assign_ports(strategy: PortStrategy | str, station: ChargingStation, fleet: Mapping | None = None) -> None:
    """Fill free ports from the queue.

    FIFO takes vehicles in admission order. Shortest-remaining-charge takes
    the vehicles needing the least energy to full first, ties by admission.
    """
    if isinstance(strategy, str):
        strategy = PortStrategy.parse(strategy)
    if strategy is PortStrategy.SHORTEST_REMAINING_CHARGE:
        if fleet is None:
            raise StationError("shortest_remaining_charge needs a fleet view")
        for vid in station.wait_queue:
            if vid not in fleet:
                raise StationError(f"station {station.id!r}: queued vehicle {vid!r} not found in fleet")
        station.wait_queue.sort(key=lambda vid: (fleet[vid].needed_kwh, station._seq[vid]))
    else:
        station.wait_queue.sort(key=lambda vid: station._seq[vid])
    while station.wait_queue and station.free_ports > 0:
        station.charging_set.append(station.wait_queue.pop(0))


class StationRegistry:
    """All stations of a scenario, keyed by id, enforcing one station per vehicle."""

    def __init__(self, stations):
        self.stations: dict = {}
        for st in stations:
            if st.id in self.stations:
                raise StationError(f"duplicate station id {st.id!r}")
            self.stations[st.id] = st
        self.location: dict = {}

    def __iter__(self):
        return iter(self.stations.values())

    def __contains__(self, sid) -> bool:
        return sid in self.stations

    def __getitem__(self, sid) -> ChargingStation:
        return self.stations[sid]

    def admit(self, sid, vid, assign: bool = True) -> None:
        if vid in self.location:
            raise StationError(f"vehicle {vid!r} is already at station {self.location[vid]!r}")
        st = self.stations[sid]
        if assign:
            st.admit(vid)
        else:
            st.enqueue(vid)
        self.location[vid] = sid

    def release(self, vid, promote: bool = True) -> ChargingStation:
        sid = self.location.pop(vid)
        st = self.stations[sid]
        st.release(vid, promote=promote)
        return st

    def load_by_bus(self, fleet: Mapping) -> dict[int, float]:
        """kW per grid bus, summed over the stations attached to it."""
        out: dict[int, float] = {}
        for st in self.stations.values():
            kw = aggregate_power(st, fleet)
            out[st.bus_id] = out.get(st.bus_id, 0.0) + kw
        return out


def load_stations(path: str | Path) -> list[ChargingStation]:
    """Read a station file: a list (or ``{"stations": [...]}``) of {id, bus_id, n_ports, lat, lon}."""
    data = read_json(path)
    if isinstance(data, list):
        data = {"stations": data}
    doc = root(data, path)
    out = []
    seen = set()
    for item in doc.items("stations"):
        sid = item.get("id", "id")
        if sid in seen:
            raise item.fail("id", f"duplicate station id {sid!r}")
        seen.add(sid)
        n_ports = item.get("n_ports", "int", None)
        if n_ports is not None and n_ports < 1:
            raise item.fail("n_ports", f"must be >= 1, got {n_ports}")
        out.append(
            ChargingStation(
                id=sid,
                bus_id=item.get("bus_id", "int"),
                n_ports=n_ports,
                lat=item.get("lat", default=None),
                lon=item.get("lon", default=None),
            )
        )
    return out


def stations_to_dict(stations) -> dict:
    rows = []
    for st in stations:
        d = {"id": st.id, "bus_id": st.bus_id}
        if st.n_ports is not None:
            d["n_ports"] = st.n_ports
        if st.lat is not None:
            d["lat"] = st.lat
            d["lon"] = st.lon
        rows.append(d)
    return {"stations": rows}
