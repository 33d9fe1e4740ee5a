"""Regenerate the synthetic data files shipped in src/gridhaul/data/.

    python scripts/make_bundled_data.py

Everything is derived from fixed seeds, so rerunning reproduces the files
byte for byte.
"""

from __future__ import annotations

import json
import math
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

DATA = Path(__file__).resolve().parents[1] / "src" / "gridhaul" / "data"


def dump(name: str, obj) -> None:
    (DATA / name).write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")


def haversine_miles(a, b) -> float:
    lat1, lon1, lat2, lon2 = map(math.radians, (*a, *b))
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * 3958.8 * math.asin(math.sqrt(h))


def small_cases() -> None:
    dump(
        "case2.json",
        {
            "base_mva": 100.0,
            "buses": [
                {"id": 1, "kind": "slack", "base_kv": 230.0, "v_set": 1.0},
                {"id": 2, "kind": "pq", "base_kv": 230.0, "load_p": 100.0, "load_q": 0.0},
            ],
            "branches": [{"from_bus": 1, "to_bus": 2, "r": 0.0, "x": 0.1}],
            "generators": [{"bus": 1, "p_set": 0.0, "v_set": 1.0}],
        },
    )
    dump(
        "case3.json",
        {
            "base_mva": 100.0,
            "buses": [
                {"id": 1, "kind": "slack", "base_kv": 138.0, "v_set": 1.02, "coord": [30.27, -97.74]},
                {"id": 2, "kind": "pv", "base_kv": 138.0, "v_set": 1.01, "coord": [29.76, -95.37]},
                {"id": 3, "kind": "pq", "base_kv": 138.0, "load_p": 90.0, "load_q": 30.0, "coord": [29.42, -98.49]},
            ],
            "branches": [
                {"from_bus": 1, "to_bus": 2, "r": 0.01, "x": 0.08, "b_charging": 0.02},
                {"from_bus": 1, "to_bus": 3, "r": 0.02, "x": 0.10, "b_charging": 0.02},
                {"from_bus": 2, "to_bus": 3, "r": 0.015, "x": 0.09, "b_charging": 0.02},
            ],
            "generators": [
                {"bus": 1, "p_set": 0.0, "v_set": 1.02},
                {"bus": 2, "p_set": 40.0, "q_min": -50.0, "q_max": 50.0, "v_set": 1.01},
            ],
        },
    )


# ---- 30-bus synthetic transmission network ---------------------------------

GEN_BUSES = {1: 1.04, 4: 1.03, 9: 1.03, 15: 1.03, 22: 1.03, 27: 1.03}
STATION_BUSES = [6, 8, 12, 14, 18, 20, 24, 26, 29, 30]


def case30():
    rng = np.random.default_rng(2000)
    n = 30
    lat = rng.uniform(29.2, 32.8, n)
    lon = rng.uniform(-100.0, -95.2, n)
    coords = list(zip(lat.round(4).tolist(), lon.round(4).tolist()))

    # spanning tree by nearest connected neighbour, then extra meshing
    dist = np.array([[haversine_miles(coords[i], coords[j]) for j in range(n)] for i in range(n)])
    edges = set()
    connected = [0]
    while len(connected) < n:
        best = None
        for i in connected:
            for j in range(n):
                if j in connected:
                    continue
                if best is None or dist[i, j] < best[0]:
                    best = (dist[i, j], i, j)
        _, i, j = best
        edges.add((min(i, j), max(i, j)))
        connected.append(j)
    for i in range(n):
        order = np.argsort(dist[i])
        for j in order[1:3]:
            edges.add((min(i, int(j)), max(i, int(j))))

    buses = []
    total_gen_share = 0.0
    for i in range(n):
        bid = i + 1
        b = {"id": bid, "base_kv": 345.0, "coord": list(coords[i])}
        if bid == 1:
            b.update(kind="slack", v_set=GEN_BUSES[bid])
        elif bid in GEN_BUSES:
            b.update(kind="pv", v_set=GEN_BUSES[bid])
        else:
            p = float(rng.uniform(25.0, 55.0))
            b.update(kind="pq", load_p=round(p, 2), load_q=round(p * 0.3, 2))
        buses.append(b)
    total_load = sum(b.get("load_p", 0.0) for b in buses)
    gens = []
    for bid, vs in GEN_BUSES.items():
        share = total_load / len(GEN_BUSES)
        gens.append({"bus": bid, "p_set": round(share if bid != 1 else 0.0, 2), "q_min": -300.0,
                     "q_max": 300.0, "v_set": vs})
        total_gen_share += share
    branches = []
    for i, j in sorted(edges):
        miles = dist[i, j]
        x = 0.0006 * miles + 0.01
        branches.append(
            {"from_bus": i + 1, "to_bus": j + 1, "r": round(x / 8, 5), "x": round(x, 5),
             "b_charging": round(0.0004 * miles, 5)}
        )
    return {"base_mva": 100.0, "buses": buses, "branches": branches, "generators": gens}


def road10(case) -> dict:
    coords = {b["id"]: b["coord"] for b in case["buses"]}
    names = [f"S{k:02d}" for k in range(len(STATION_BUSES))]
    nodes = [{"id": name, "bus_id": bus, "lat": coords[bus][0], "lon": coords[bus][1]}
             for name, bus in zip(names, STATION_BUSES)]
    pts = [coords[b] for b in STATION_BUSES]
    n = len(pts)
    d = [[haversine_miles(pts[i], pts[j]) * 1.2 for j in range(n)] for i in range(n)]
    edges = set()
    for i in range(n):
        for j in sorted(range(n), key=lambda j: d[i][j])[1:4]:
            if d[i][j] <= 380:
                edges.add((min(i, j), max(i, j)))
    return {
        "nodes": nodes,
        "edges": [{"a": names[i], "b": names[j], "miles": round(d[i][j], 1)} for i, j in sorted(edges)],
    }


def stations10(road) -> dict:
    return {"stations": [{"id": n["id"], "bus_id": n["bus_id"], "lat": n["lat"], "lon": n["lon"]}
                         for n in road["nodes"]]}


def series(case, start: datetime, hours: int):
    loads, wind, solar = [], [], []
    rng = np.random.default_rng(7)
    wind_buses = [9, 22]
    solar_buses = [15, 27]
    for h in range(hours + 1):
        t = start + timedelta(hours=h)
        hod = t.hour
        shape = 0.85 + 0.2 * math.sin(math.pi * (hod - 9) / 12) ** 2 if 9 <= hod <= 21 else 0.8
        for b in case["buses"]:
            if b["kind"] != "pq":
                continue
            f = shape * (1 + 0.02 * rng.standard_normal())
            loads.append((t, b["id"], round(b["load_p"] * f, 3), round(b["load_q"] * f, 3)))
        for bus in wind_buses:
            wind.append((t, bus, round(float(40 + 25 * math.cos(2 * math.pi * h / 24) + 5 * rng.standard_normal()), 3)))
        for bus in solar_buses:
            sun = max(0.0, math.sin(math.pi * (hod - 6) / 12)) if 6 <= hod <= 18 else 0.0
            solar.append((t, bus, round(60 * sun, 3)))
    return loads, wind, solar


def write_csv(name, header, rows):
    with open(DATA / name, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for t, *rest in rows:
            fh.write(",".join([t.isoformat()] + [str(x) for x in rest]) + "\n")


# ---- feeders -----------------------------------------------------------------


def feeder5() -> dict:
    return {
        "id": "feeder5",
        "source": 0,
        "source_v": 1.0,
        "base_kv": 12.47,
        "base_mva": 1.0,
        "impedance_unit": "ohm",
        "nodes": [
            {"id": 0, "load_p": 0.0, "load_q": 0.0},
            {"id": 1, "load_p": 200.0, "load_q": 60.0},
            {"id": 2, "load_p": 150.0, "load_q": 45.0},
            {"id": 3, "load_p": 250.0, "load_q": 80.0},
            {"id": 4, "load_p": 100.0, "load_q": 30.0},
        ],
        "lines": [
            {"from": 0, "to": 1, "r": 0.306, "x": 0.627},
            {"from": 1, "to": 2, "r": 0.306, "x": 0.627},
            {"from": 1, "to": 3, "r": 0.592, "x": 0.680},
            {"from": 3, "to": 4, "r": 0.592, "x": 0.680},
        ],
    }


def feeder_sweep(n_trunk=12, lateral=4, trunk_miles=0.5, lateral_miles=0.8, source_v=1.03) -> dict:
    """12.47 kV feeder: a trunk with short laterals hanging off every trunk node.

    Trunk spans are 0.5 mi of 336 ACSR, laterals 0.8 mi of 1/0 ACSR; about
    4.5 MW of background load at 0.95 power factor.
    """
    rng = np.random.default_rng(1247)
    trunk_z = (0.306 * trunk_miles, 0.627 * trunk_miles)
    lat_z = (0.592 * lateral_miles, 0.680 * lateral_miles)
    nodes = [{"id": 0, "load_p": 0.0, "load_q": 0.0}]
    lines = []
    nid = 1
    prev = 0
    for _ in range(n_trunk):
        t = nid
        nodes.append({"id": t})
        lines.append({"from": prev, "to": t, "r": round(trunk_z[0], 4), "x": round(trunk_z[1], 4)})
        nid += 1
        up = t
        for _ in range(lateral):
            nodes.append({"id": nid})
            lines.append({"from": up, "to": nid, "r": round(lat_z[0], 4), "x": round(lat_z[1], 4)})
            up = nid
            nid += 1
        prev = t
    for node in nodes[1:]:
        p = float(rng.uniform(40.0, 110.0))
        node["load_p"] = round(p, 1)
        node["load_q"] = round(p * 0.33, 1)
    return {
        "id": f"feeder{len(nodes)}",
        "source": 0,
        "source_v": source_v,
        "base_kv": 12.47,
        "base_mva": 1.0,
        "impedance_unit": "ohm",
        "nodes": nodes,
        "lines": lines,
    }


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    small_cases()
    case = case30()
    dump("case30.json", case)
    road = road10(case)
    dump("road10.json", road)
    dump("stations10.json", stations10(road))
    start = datetime(2020, 7, 1)
    loads, wind, solar = series(case, start, 49)
    write_csv("loads30.csv", ["timestamp", "bus_id", "p_mw", "q_mvar"], loads)
    write_csv("wind30.csv", ["timestamp", "bus_id", "p_mw"], wind)
    write_csv("solar30.csv", ["timestamp", "bus_id", "p_mw"], solar)
    dump(
        "scenario.json",
        {
            "network": "case30.json",
            "road": "road10.json",
            "stations": "stations10.json",
            "loads": "loads30.csv",
            "wind": "wind30.csv",
            "solar": "solar30.csv",
            "start_time": "2020-07-01T00:00:00",
            "duration_hours": 48,
            "dt_hours": 0.25,
            "initial_hdevs": 300,
            "arrival_rate_per_hour": 120,
            "rng_seed": 17,
            "hdev_params": {"capacity_kwh": 900, "consumption_kwh_per_mile": 2.0, "speed_mph": 60.0,
                            "charge_kw": 150.0, "reserve_fraction": 0.1},
            "port_strategy": "fifo",
            "band": [0.95, 1.05],
            "collapse_sentinel": 0.01,
        },
    )
    dump("feeder5.json", feeder5())
    fs = feeder_sweep()
    dump(f"{fs['id']}.json", fs)
    dump(
        "sweep.json",
        {
            "feeders": [f"{fs['id']}.json"],
            "station_counts": [5, 10, 20, 50],
            "vehicle_grid": [0, 5, 10, 15, 20, 25, 30, 40, 50, 60, 80, 100],
            "samples_per_cell": 100,
            "master_seed": 2021,
            "per_vehicle_kw": 150.0,
        },
    )


if __name__ == "__main__":
    main()
