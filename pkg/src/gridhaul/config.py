"""Scenario and sweep config files (JSON). Relative paths resolve against the config's directory."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any

from gridhaul._files import FileFormatError, Fields, read_json, root
from gridhaul.analytics import ViolationBand
from gridhaul.engine import TransmissionScenario
from gridhaul.fleet import ArrivalProcess, HdevParams
from gridhaul.grid import load_case
from gridhaul.pf_distribution import Feeder, load_feeder
from gridhaul.pf_transmission import PfOptions
from gridhaul.road import RoadGraph, load_road
from gridhaul.stations import PortStrategy, load_stations
from gridhaul.timeseries import parse_time, read_series


def _path(doc: Fields, key: str, base: Path, required: bool = True) -> Path | None:
    raw = doc.get(key, "str", None)
    if raw is None:
        if required:
            raise doc.fail(key, "missing required field")
        return None
    p = Path(raw)
    p = p if p.is_absolute() else base / p
    if not p.exists():
        raise doc.fail(key, f"file not found: {p}")
    return p


def _band(doc: Fields) -> ViolationBand:
    raw = doc.raw("band")
    if raw is None:
        return ViolationBand()
    if not (isinstance(raw, list) and len(raw) == 2 and all(isinstance(x, (int, float)) for x in raw)):
        raise doc.fail("band", "expected [lower, upper]")
    try:
        return ViolationBand(float(raw[0]), float(raw[1]))
    except ValueError as exc:
        raise doc.fail("band", str(exc)) from None


def _hdev_params(doc: Fields) -> HdevParams:
    raw = doc.raw("hdev_params") or {}
    sub = Fields(raw, f"{doc.where} hdev_params")
    kwargs = {}
    for name in ("capacity_kwh", "consumption_kwh_per_mile", "speed_mph", "charge_kw", "reserve_fraction"):
        val = sub.get(name, default=None)
        if val is not None:
            kwargs[name] = val
    unknown = set(raw) - set(HdevParams.__dataclass_fields__)
    if unknown:
        raise sub.fail(sorted(unknown)[0], "unknown parameter")
    try:
        return HdevParams(**kwargs)
    except ValueError as exc:
        raise doc.fail("hdev_params", str(exc)) from None


def _weights(doc: Fields, key: str, road: RoadGraph) -> dict | None:
    raw = doc.raw(key)
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise doc.fail(key, "expected an object mapping road node id to weight")
    by_text = {str(n): n for n in road.nodes}
    out = {}
    for k, w in raw.items():
        if k not in by_text:
            raise doc.fail(key, f"unknown road node {k!r}")
        if isinstance(w, bool) or not isinstance(w, (int, float)) or w < 0:
            raise doc.fail(key, f"weight for {k!r} must be a non-negative number")
        out[by_text[k]] = float(w)
    return out


def _pf_options(doc: Fields) -> PfOptions:
    raw = doc.raw("pf") or {}
    sub = Fields(raw, f"{doc.where} pf")
    try:
        return PfOptions(
            tol=sub.get("tol", default=1e-8),
            max_iter=sub.get("max_iter", "int", 30),
            flat_start=sub.get("flat_start", "bool", True),
            enforce_q_limits=sub.get("enforce_q_limits", "bool", False),
        )
    except ValueError as exc:
        raise doc.fail("pf", str(exc)) from None


@dataclass
class ScenarioConfig:
    scenario: TransmissionScenario
    write_geojson: bool = True


def load_scenario(path: str | Path, overrides: dict[str, Any] | None = None) -> ScenarioConfig:
    """Build a :class:`TransmissionScenario` from a config file.

    ``overrides`` replaces top-level config keys (command-line flags win).
    """
    path = Path(path)
    data = read_json(path)
    if not isinstance(data, dict):
        raise FileFormatError(f"{path}: expected an object")
    data = {**data, **{k: v for k, v in (overrides or {}).items() if v is not None}}
    doc = root(data, path)
    base = path.parent
    network = load_case(_path(doc, "network", base))
    road = load_road(_path(doc, "road", base))
    st_path = _path(doc, "stations", base, required=False)
    stations = load_stations(st_path) if st_path else None
    loads = read_series(p, "load") if (p := _path(doc, "loads", base, False)) else None
    wind = read_series(p, "generation") if (p := _path(doc, "wind", base, False)) else None
    solar = read_series(p, "generation") if (p := _path(doc, "solar", base, False)) else None

    rate = doc.get("arrival_rate_per_hour", default=0.0)
    entry = _weights(doc, "entry_weights", road) or {n: 1.0 for n in road.nodes}
    dest = _weights(doc, "destination_weights", road) or {n: 1.0 for n in road.nodes}
    try:
        arrivals = ArrivalProcess(rate, entry, dest)
    except ValueError as exc:
        raise doc.fail("arrival_rate_per_hour", str(exc)) from None

    start_raw = doc.get("start_time", "str", "2020-07-01T00:00:00")
    try:
        start = parse_time(start_raw)
    except ValueError:
        raise doc.fail("start_time", f"not ISO-8601: {start_raw!r}") from None
    try:
        strategy = PortStrategy.parse(doc.get("port_strategy", "str", "fifo"))
    except ValueError as exc:
        raise doc.fail("port_strategy", str(exc)) from None

    initial = []
    for item in doc.items("initial_vehicles", required=False):
        initial.append((item.get("start", "id"), item.get("destination", "id")) + (
            (item.get("soc_kwh"),) if item.raw("soc_kwh") is not None else ()
        ))
    scn = TransmissionScenario(
        network=network,
        road=road,
        arrivals=arrivals,
        stations=stations,
        hdev_params=_hdev_params(doc),
        start_time=start,
        duration_hours=doc.get("duration_hours", default=24.0),
        dt_hours=doc.get("dt_hours", default=0.25),
        seed=doc.get("rng_seed", "int", 0),
        initial_hdevs=doc.get("initial_hdevs", "int", 0),
        initial_vehicles=initial,
        loads=loads,
        wind=wind,
        solar=solar,
        pf=_pf_options(doc),
        band=_band(doc),
        collapse_sentinel=doc.get("collapse_sentinel", default=0.01),
        port_strategy=strategy,
        warm_start=doc.get("warm_start", "bool", True),
    )
    return ScenarioConfig(scn, doc.get("geojson", "bool", True))


@dataclass
class SweepConfig:
    feeders: list[Feeder]
    station_counts: list[int]
    vehicle_grid: list[int]
    samples_per_cell: int
    master_seed: int
    band: ViolationBand
    per_vehicle_kw: float
    reactive_fraction: float


def _int_list(doc: Fields, key: str, default: list[int]) -> list[int]:
    raw = doc.raw(key)
    if raw is None:
        return list(default)
    if not isinstance(raw, list) or not raw or any(isinstance(x, bool) or not isinstance(x, int) or x < 0 for x in raw):
        raise doc.fail(key, "expected a non-empty list of non-negative integers")
    return list(raw)


def load_sweep_config(path: str | Path, overrides: dict[str, Any] | None = None) -> SweepConfig:
    path = Path(path)
    data = read_json(path)
    if not isinstance(data, dict):
        raise FileFormatError(f"{path}: expected an object")
    data = {**data, **{k: v for k, v in (overrides or {}).items() if v is not None}}
    doc = root(data, path)
    raw = doc.raw("feeders")
    if not isinstance(raw, list) or not raw:
        raise doc.fail("feeders", "expected a non-empty list of feeder file paths")
    feeders = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, str):
            raise doc.fail(f"feeders[{i}]", "expected a path")
        p = Path(entry) if Path(entry).is_absolute() else path.parent / entry
        if not p.exists():
            raise doc.fail(f"feeders[{i}]", f"file not found: {p}")
        feeders.append(load_feeder(p))
    samples = doc.get("samples_per_cell", "int", 100)
    if samples < 1:
        raise doc.fail("samples_per_cell", "must be >= 1")
    return SweepConfig(
        feeders=feeders,
        station_counts=_int_list(doc, "station_counts", [5, 10, 20, 50]),
        vehicle_grid=_int_list(doc, "vehicle_grid", [0, 10, 20, 50, 100]),
        samples_per_cell=samples,
        master_seed=doc.get("master_seed", "int", 0),
        band=_band(doc),
        per_vehicle_kw=doc.get("per_vehicle_kw", default=150.0),
        reactive_fraction=doc.get("reactive_fraction", default=0.0),
    )
