"""Time-stepping co-simulation and the distribution-feeder Monte Carlo sweep.

Each transmission step runs seven phases in a fixed order:

1. spawn arrivals
2. step every vehicle
3. station admissions / releases from the vehicle events
4. aggregate station kW per bus
5. apply background load, wind and solar for the timestamp
6. solve the power flow (warm-started from the previous converged step)
7. record a :class:`StepRecord`
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Callable, Sequence

import numpy as np

from gridhaul.analytics import ViolationBand, count_violations
from gridhaul.fleet import (
    ArrivalProcess,
    Charging,
    EventKind,
    HdevParams,
    IdSource,
    Idle,
    VehicleManager,
    new_vehicle,
    spawn_arrivals,
)
from gridhaul.grid import Network, require_valid
from gridhaul.pf_distribution import Feeder, order_radial, sample_placement, solve_fbs
from gridhaul.pf_transmission import DEFAULT_SENTINEL, PfOptions, PfSolution, export_voltages, solve_nr
from gridhaul.road import RoadGraph
from gridhaul.stations import ChargingStation, PortStrategy, StationRegistry
from gridhaul.timeseries import TimeSeries

log = logging.getLogger(__name__)

THREADS_ENV = "GRIDHAUL_THREADS"


class ScenarioError(ValueError):
    pass


@dataclass
class TransmissionScenario:
    network: Network
    road: RoadGraph
    arrivals: ArrivalProcess
    stations: list[ChargingStation] | None = None  # default: one unlimited station per road node
    hdev_params: HdevParams = field(default_factory=HdevParams)
    start_time: datetime = datetime(2020, 7, 1, tzinfo=timezone.utc)
    duration_hours: float = 24.0
    dt_hours: float = 0.25
    seed: int = 0
    initial_hdevs: int = 0
    initial_vehicles: Sequence[tuple] = ()  # explicit (start, destination[, soc_kwh])
    loads: TimeSeries | None = None
    wind: TimeSeries | None = None
    solar: TimeSeries | None = None
    pf: PfOptions = field(default_factory=PfOptions)
    band: ViolationBand = field(default_factory=ViolationBand)
    collapse_sentinel: float = DEFAULT_SENTINEL
    port_strategy: PortStrategy = PortStrategy.FIFO
    warm_start: bool = True

    def __post_init__(self):
        if not self.duration_hours > 0:
            raise ScenarioError(f"duration must be > 0, got {self.duration_hours}")
        if not self.dt_hours > 0:
            raise ScenarioError(f"dt must be > 0, got {self.dt_hours}")
        if self.start_time.tzinfo is None:
            self.start_time = self.start_time.replace(tzinfo=timezone.utc)

    @property
    def n_steps(self) -> int:
        return max(1, math.ceil(self.duration_hours / self.dt_hours - 1e-9))

    def timestamp(self, step: int) -> datetime:
        return self.start_time + timedelta(hours=step * self.dt_hours)


@dataclass
class StepRecord:
    timestamp: datetime | None
    n_charging: int
    n_idle: int = 0
    n_moving: int = 0
    n_departed: int = 0  # cumulative, arrived at destination
    converged: bool = True
    n_violations: int = 0
    violating_buses: list = field(default_factory=list)
    station_kw: dict = field(default_factory=dict)  # bus id -> kW
    v_mag: dict = field(default_factory=dict)  # bus id -> pu, sentinel when collapsed
    n_stranded: int = 0  # cumulative
    n_arrivals: int = 0  # cumulative vehicles that entered

    @property
    def in_system(self) -> int:
        return self.n_charging + self.n_idle + self.n_moving


def _default_stations(road: RoadGraph) -> list[ChargingStation]:
    out = []
    for node in road.nodes.values():
        if node.bus_id is not None:
            out.append(ChargingStation(node.id, node.bus_id, None, node.lat, node.lon))
    return out


def preflight(scn: TransmissionScenario) -> list[ChargingStation]:
    """Check that every reference resolves before any stepping happens."""
    require_valid(scn.network)
    stations = scn.stations if scn.stations is not None else _default_stations(scn.road)
    for st in stations:
        if not scn.network.has_bus(st.bus_id):
            raise ScenarioError(f"station {st.id!r} is attached to unknown bus {st.bus_id}")
        if st.id not in scn.road:
            raise ScenarioError(f"station {st.id!r} is not a road-graph node")
    for name in ("entry_weights", "destination_weights"):
        for node in getattr(scn.arrivals, name):
            if node not in scn.road:
                raise ScenarioError(f"arrival {name} names unknown road node {node!r}")
    end = scn.timestamp(scn.n_steps)
    for label, series in (("load", scn.loads), ("wind", scn.wind), ("solar", scn.solar)):
        if series is None:
            continue
        for bus in series.buses:
            if not scn.network.has_bus(bus):
                raise ScenarioError(f"{label} series references unknown bus {bus}")
        gaps = series.uncovered(scn.start_time, end)
        if gaps:
            raise ScenarioError(
                f"{label} series does not cover {scn.start_time.isoformat()} .. {end.isoformat()} for buses {gaps}"
            )
    for start, dest, *_ in scn.initial_vehicles:
        for node in (start, dest):
            if node not in scn.road:
                raise ScenarioError(f"initial vehicle references unknown road node {node!r}")
    return stations


def background_at(scn: TransmissionScenario, when: datetime) -> tuple[Network, dict[int, tuple[float, float]]]:
    """Network with time-series loads applied, plus renewable output as negative load."""
    network = scn.network
    if scn.loads is not None:
        network = network.with_loads(scn.loads.at(when))
    extra: dict[int, tuple[float, float]] = {}
    for series in (scn.wind, scn.solar):
        if series is None:
            continue
        for bus, (p, _) in series.at(when).items():
            q0 = extra.get(bus, (0.0, 0.0))
            extra[bus] = (q0[0] - p, q0[1])
    return network, extra


class _Solver:
    """Power-flow wrapper carrying the warm start between steps."""

    def __init__(self, scn: TransmissionScenario):
        self.scn = scn
        self.prev: PfSolution | None = None

    def __call__(self, network: Network, injections: dict) -> PfSolution:
        scn = self.scn
        if scn.warm_start and self.prev is not None and self.prev.converged:
            opts = PfOptions(scn.pf.tol, scn.pf.max_iter, False, scn.pf.enforce_q_limits)
            sol = solve_nr(network, injections, opts, initial=(self.prev.v_mag, self.prev.v_ang))
        else:
            # first step, or recovering from a collapse: flat start
            opts = PfOptions(scn.pf.tol, scn.pf.max_iter, True, scn.pf.enforce_q_limits)
            sol = solve_nr(network, injections, opts)
        self.prev = sol
        return sol


def _merge(a: dict, b: dict) -> dict:
    out = dict(a)
    for bus, (p, q) in b.items():
        p0, q0 = out.get(bus, (0.0, 0.0))
        out[bus] = (p0 + p, q0 + q)
    return out


class FleetSim:
    """Vehicles and charging stations stepped together, without the grid.

    One call to :meth:`step` covers arrivals, movement and charging, then
    station bookkeeping in vehicle-id order; it returns kW drawn per bus.
    """

    def __init__(
        self,
        road: RoadGraph,
        stations: Sequence[ChargingStation],
        arrivals: ArrivalProcess,
        params: HdevParams,
        dt_hours: float,
        rng: np.random.Generator,
        port_strategy: PortStrategy = PortStrategy.FIFO,
        initial_hdevs: int = 0,
        initial_vehicles: Sequence[tuple] = (),
    ):
        # fresh copies: station objects carry port and queue state between runs
        fresh = [ChargingStation(st.id, st.bus_id, st.n_ports, st.lat, st.lon) for st in stations]
        self.registry = StationRegistry(fresh)
        self.fleet = VehicleManager(road, chargeable={st.id for st in fresh})
        self.arrivals = arrivals
        self.params = params
        self.dt_hours = dt_hours
        self.rng = rng
        self.strategy = port_strategy
        self.ids = IdSource()
        self.steps_done = 0
        self._initial = (initial_hdevs, list(initial_vehicles))

    def step(self) -> dict[int, float]:
        fleet, rng = self.fleet, self.rng
        events = []
        if self.steps_done == 0:
            n_initial, specs = self._initial
            for spec in specs:
                soc = spec[2] if len(spec) > 2 else None
                events += fleet.add(new_vehicle(self.ids(), self.params, spec[0], spec[1], rng, soc))
            for v in spawn_arrivals(self.arrivals, self.dt_hours, rng, self.params, self.ids, count=n_initial):
                events += fleet.add(v)
        for v in spawn_arrivals(self.arrivals, self.dt_hours, rng, self.params, self.ids):
            events += fleet.add(v)
        events += fleet.step_all(self.dt_hours)
        _apply_station_events(events, fleet, self.registry, self.strategy)
        self.steps_done += 1
        return self.registry.load_by_bus(fleet.vehicles)


def run_transmission_scenario(
    scn: TransmissionScenario, on_step: Callable[[int, StepRecord], None] | None = None
) -> list[StepRecord]:
    sim = FleetSim(
        scn.road, preflight(scn), scn.arrivals, scn.hdev_params, scn.dt_hours,
        np.random.default_rng(scn.seed), scn.port_strategy, scn.initial_hdevs, scn.initial_vehicles,
    )
    fleet = sim.fleet
    solver = _Solver(scn)
    records: list[StepRecord] = []

    for step in range(1, scn.n_steps + 1):
        when = scn.timestamp(step)

        # 1-4. arrivals, movement, station bookkeeping, station load per bus
        station_kw = sim.step()

        # 5. background
        network, renewables = background_at(scn, when)
        ev_load = {bus: (kw / 1000.0, 0.0) for bus, kw in sorted(station_kw.items()) if kw}
        injections = _merge(renewables, ev_load)

        # 6. power flow
        sol = solver(network, injections)
        v_out = export_voltages(sol, scn.collapse_sentinel)

        # 7. record
        fleet.check_conservation()
        counts = fleet.counts()
        v_map = dict(zip(sol.bus_ids, v_out.tolist()))
        viol = count_violations(v_map, scn.band)
        rec = StepRecord(
            timestamp=when,
            n_charging=counts["charging"],
            n_idle=counts["idle"],
            n_moving=counts["moving"],
            n_departed=fleet.counters.departed,
            converged=sol.converged,
            n_violations=viol.count,
            violating_buses=viol.buses,
            station_kw=station_kw,
            v_mag=v_map,
            n_stranded=fleet.counters.stranded,
            n_arrivals=fleet.counters.arrived,
        )
        if rec.in_system != len(fleet.vehicles):
            raise RuntimeError(f"step {step}: state counts do not add up to vehicles in system")
        records.append(rec)
        if on_step is not None:
            on_step(step, rec)
    if fleet.audits:
        log.warning("%d vehicle(s) could not be routed to their destination", len(fleet.audits))
    return records


def _apply_station_events(events, fleet: VehicleManager, registry: StationRegistry, strategy: PortStrategy) -> None:
    fifo = strategy is PortStrategy.FIFO
    touched = set()
    follow_up = []
    for ev in sorted(events, key=lambda e: e.vehicle_id):
        if ev.kind is EventKind.CHARGE_REQUEST:
            registry.admit(ev.node, ev.vehicle_id, assign=fifo)
            touched.add(ev.node)
        elif ev.kind is EventKind.FULLY_CHARGED:
            st = registry.release(ev.vehicle_id, promote=fifo)
            touched.add(st.id)
            follow_up.append(ev.vehicle_id)
    for sid in sorted(touched, key=str):
        st = registry[sid]
        if not fifo:
            st.assign_ports(strategy, fleet.vehicles)
        for vid in st.charging_set:
            if not isinstance(fleet.vehicles[vid].state, Charging):
                fleet.set_state(vid, Charging(sid))
        for vid in st.wait_queue:
            if not isinstance(fleet.vehicles[vid].state, Idle):
                fleet.set_state(vid, Idle(sid))
    # charged vehicles leave the port and set off next step
    for vid in follow_up:
        fleet.dispatch(vid)


def background_trajectory(scn: TransmissionScenario) -> list[dict[int, float]]:
    """Exported voltages per step with no vehicles at all, same solver policy."""
    preflight(scn)
    solver = _Solver(scn)
    out = []
    for step in range(1, scn.n_steps + 1):
        network, renewables = background_at(scn, scn.timestamp(step))
        sol = solver(network, renewables)
        out.append(dict(zip(sol.bus_ids, export_voltages(sol, scn.collapse_sentinel).tolist())))
    return out


def run_charging_sweep(
    network: Network,
    station_buses: Sequence[int],
    fleet_sizes: Sequence[int],
    samples: int,
    seed: int,
    charge_kw: float = 150.0,
    opts: PfOptions | None = None,
    band: ViolationBand | None = None,
    collapse_sentinel: float = DEFAULT_SENTINEL,
) -> list[StepRecord]:
    """Snapshot solves with N vehicles charging at once, split uniformly at
    random over the station buses; one record per (N, sample)."""
    band = band or ViolationBand()
    rng = np.random.default_rng(seed)
    k = len(station_buses)
    records = []
    for n in fleet_sizes:
        for _ in range(samples):
            counts = rng.multinomial(n, np.full(k, 1.0 / k)) if n else np.zeros(k, dtype=int)
            kw: dict[int, float] = {}
            for bus, c in zip(station_buses, counts):
                kw[bus] = kw.get(bus, 0.0) + c * charge_kw
            inj = {bus: (p / 1000.0, 0.0) for bus, p in kw.items() if p}
            sol = solve_nr(network, inj, opts)
            v_map = dict(zip(sol.bus_ids, export_voltages(sol, collapse_sentinel).tolist()))
            viol = count_violations(v_map, band)
            records.append(
                StepRecord(
                    timestamp=None,
                    n_charging=int(n),
                    converged=sol.converged,
                    n_violations=viol.count,
                    violating_buses=viol.buses,
                    station_kw=kw,
                    v_mag=v_map,
                )
            )
    return records


# --- distribution sweep -------------------------------------------------------


@dataclass(frozen=True)
class SweepSample:
    feeder_id: str
    n_stations: int
    n_vehicles: int
    placement_seed: int
    n_violations: int
    converged: bool


@dataclass(frozen=True)
class SkippedCell:
    feeder_id: str
    n_stations: int
    n_vehicles: int
    reason: str


@dataclass
class SweepResult:
    samples: list[SweepSample]
    skipped: list[SkippedCell]

    def __iter__(self):
        return iter(self.samples)

    def __len__(self):
        return len(self.samples)

    def cell(self, feeder_id: str, n_stations: int, n_vehicles: int) -> list[SweepSample]:
        return [
            s
            for s in self.samples
            if s.feeder_id == feeder_id and s.n_stations == n_stations and s.n_vehicles == n_vehicles
        ]


def sample_seed(master_seed: int, feeder_index: int, n_stations: int, n_vehicles: int, sample: int) -> int:
    """Placement seed for one sample, a pure function of its coordinates."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(feeder_index, n_stations, n_vehicles, sample))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
        try:
            workers = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if workers < 0:
        raise ValueError("worker count must be >= 0")
    return workers or (os.cpu_count() or 1)


@dataclass(frozen=True)
class _Cell:
    feeder: Feeder
    feeder_index: int
    n_stations: int
    n_vehicles: int
    samples: int
    master_seed: int
    band: ViolationBand
    per_vehicle_kw: float
    reactive_fraction: float
    tol: float
    max_iter: int


def _run_cell(cell: _Cell) -> list[SweepSample]:
    order = order_radial(cell.feeder)
    source = cell.feeder.source
    out = []
    for k in range(cell.samples):
        seed = sample_seed(cell.master_seed, cell.feeder_index, cell.n_stations, cell.n_vehicles, k)
        placement = sample_placement(
            cell.feeder, cell.n_stations, cell.n_vehicles, seed, cell.per_vehicle_kw, cell.reactive_fraction
        )
        res = solve_fbs(cell.feeder, placement, cell.tol, cell.max_iter, order=order)
        if res.converged:
            vm = {nid: v for nid, v in res.voltages().items() if nid != source}
            n_viol = count_violations(vm, cell.band).count
        else:
            # a feeder that will not solve is collapsed: every node violates
            n_viol = len(cell.feeder.nodes) - 1
        out.append(
            SweepSample(cell.feeder.id, cell.n_stations, cell.n_vehicles, seed, n_viol, res.converged)
        )
    return out


def run_distribution_sweep(
    feeders: Sequence[Feeder],
    station_counts: Sequence[int] = (5, 10, 20, 50),
    vehicle_grid: Sequence[int] = (0, 10, 20, 50, 100),
    samples_per_cell: int = 100,
    master_seed: int = 0,
    band: ViolationBand | None = None,
    per_vehicle_kw: float = 150.0,
    reactive_fraction: float = 0.0,
    tol: float = 1e-10,
    max_iter: int = 100,
    workers: int | None = 1,
) -> SweepResult:
    """Monte Carlo over (feeder, station count, vehicle count) cells.

    Violations are counted over every node except the substation source.
    Cells asking for more stations than a feeder has candidate nodes are
    skipped and listed in ``SweepResult.skipped``.
    """
    if not station_counts:
        raise ValueError("station_counts must not be empty")
    if not vehicle_grid:
        raise ValueError("vehicle_grid must not be empty")
    if samples_per_cell < 1:
        raise ValueError("samples_per_cell must be >= 1")
    band = band or ViolationBand()
    cells: list[_Cell] = []
    skipped: list[SkippedCell] = []
    for fi, feeder in enumerate(feeders):
        order_radial(feeder)
        n_cand = len(feeder.candidates())
        for ns in station_counts:
            for nv in vehicle_grid:
                if ns > n_cand or ns < 0 or nv < 0 or (ns == 0 and nv > 0):
                    reason = f"{ns} stations requested, {n_cand} candidate nodes"
                    skipped.append(SkippedCell(feeder.id, ns, nv, reason))
                    log.warning("skipping cell %s/%d stations/%d vehicles: %s", feeder.id, ns, nv, reason)
                    continue
                cells.append(
                    _Cell(feeder, fi, ns, nv, samples_per_cell, master_seed, band, per_vehicle_kw,
                          reactive_fraction, tol, max_iter)
                )
    n_workers = min(resolve_workers(workers), len(cells)) if cells else 1
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            chunks = list(pool.map(_run_cell, cells))
    else:
        chunks = [_run_cell(c) for c in cells]
    return SweepResult([s for chunk in chunks for s in chunk], skipped)
