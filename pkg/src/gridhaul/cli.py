"""Command-line entry point: ``gridhaul <subcommand> [options]``.

Every subcommand accepts ``--config FILE`` (JSON), ``--seed`` and ``--out``.
Values from the config file are defaults; flags given on the command line win.
Set ``GRIDHAUL_THREADS`` to cap sweep worker processes (0 = one per CPU).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from gridhaul import __version__
from gridhaul._files import FileFormatError, read_json
from gridhaul.analytics import ViolationBand, count_violations, summarize
from gridhaul.engine import ScenarioError, run_distribution_sweep, run_transmission_scenario
from gridhaul.export import (
    export_geojson,
    export_step_records,
    export_sweep,
    export_voltage_table,
    write_geojson,
)
from gridhaul.grid import InvalidNetworkError, bus_coords, load_case, validate
from gridhaul.pf_distribution import (
    RadialityError,
    StationPlacement,
    load_feeder,
    sample_placement,
    solve_fbs,
    validate_feeder,
)
from gridhaul.pf_transmission import PfOptions, export_voltages, solve_nr
from gridhaul.road import load_road
from gridhaul.stations import load_stations

log = logging.getLogger("gridhaul")


class UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="JSON config; its keys are defaults for the flags below")
    p.add_argument("--seed", type=int, default=None, help="random seed")
    p.add_argument("--out", metavar="PATH", default=None, help="output file or directory")


def _kv_pairs(items, what: str, n_min: int, n_max: int) -> list[list[str]]:
    out = []
    for item in items or []:
        parts = item.split(":")
        if not n_min <= len(parts) <= n_max:
            raise UsageError(f"bad {what} {item!r}")
        out.append(parts)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridhaul",
        description="Heavy-duty EV fleet and power grid co-simulation.",
        epilog="Environment: GRIDHAUL_THREADS caps sweep worker processes (0 = auto).",
    )
    parser.add_argument("--version", action="version", version=f"gridhaul {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")
    sub.required = True

    p = sub.add_parser("validate", help="check data files and report every problem found")
    p.add_argument("files", nargs="*", metavar="FILE")
    p.add_argument(
        "--kind",
        choices=["auto", "case", "feeder", "road", "stations"],
        default="auto",
        help="file type (default: guess from the keys present)",
    )
    _common(p)

    p = sub.add_parser("solve-pf", help="one Newton-Raphson power flow on a transmission case")
    p.add_argument("case", nargs="?", metavar="CASE")
    p.add_argument("--tol", type=float, default=None, help="max power mismatch in pu (default 1e-8)")
    p.add_argument("--max-iter", type=int, default=None, help="Newton iteration cap (default 30)")
    p.add_argument("--enforce-q-limits", action="store_true", default=None, help="switch PV buses at Q limits")
    p.add_argument("--load", action="append", metavar="BUS:MW[:MVAR]", help="extra load at a bus (repeatable)")
    p.add_argument("--sentinel", type=float, default=None, help="reported magnitude on collapse (default 0.01)")
    p.add_argument("--geojson", metavar="FILE", default=None, help="also write a GeoJSON voltage snapshot")
    _common(p)

    p = sub.add_parser("solve-feeder", help="one forward-backward sweep on a radial feeder")
    p.add_argument("feeder", nargs="?", metavar="FEEDER")
    p.add_argument("--station", action="append", metavar="NODE:VEHICLES", help="vehicles charging at a node")
    p.add_argument("--n-stations", type=int, default=None, help="sample this many station sites (uses --seed)")
    p.add_argument("--n-vehicles", type=int, default=None, help="vehicles spread over sampled stations")
    p.add_argument("--per-vehicle-kw", type=float, default=None, help="charging power per vehicle (default 150)")
    p.add_argument("--tol", type=float, default=None, help="voltage-change tolerance in pu (default 1e-10)")
    p.add_argument("--max-iter", type=int, default=None, help="sweep iteration cap (default 100)")
    _common(p)

    p = sub.add_parser("simulate-transmission", help="time-series fleet/grid co-simulation")
    p.add_argument("scenario", nargs="?", metavar="SCENARIO", help="scenario config (same as --config)")
    p.add_argument("--duration-hours", type=float, default=None)
    p.add_argument("--arrival-rate", type=float, default=None, help="vehicle arrivals per hour")
    p.add_argument("--initial-hdevs", type=int, default=None)
    p.add_argument("--no-geojson", action="store_true", help="skip per-step GeoJSON snapshots")
    _common(p)

    p = sub.add_parser("sweep-distribution", help="Monte Carlo station-placement sweep on feeders")
    p.add_argument("sweep", nargs="?", metavar="SWEEP", help="sweep config (same as --config)")
    p.add_argument("--samples", type=int, default=None, help="samples per cell")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: GRIDHAUL_THREADS)")
    _common(p)
    return parser


def _apply_config(args: argparse.Namespace) -> dict:
    """Fill unset flags from the config file; return the raw config."""
    if not args.config:
        return {}
    cfg = read_json(args.config)
    if not isinstance(cfg, dict):
        raise FileFormatError(f"{args.config}: expected an object")
    base = Path(args.config).parent
    for key, val in cfg.items():
        dest = key.replace("-", "_")
        if hasattr(args, dest) and getattr(args, dest) in (None, False):
            if dest in ("case", "feeder", "out", "geojson") and isinstance(val, str) and not Path(val).is_absolute():
                val = str(base / val)
            setattr(args, dest, val)
    return cfg


def _detect_kind(path: str) -> str:
    data = read_json(path)
    if isinstance(data, list) or (isinstance(data, dict) and "stations" in data):
        return "stations"
    if isinstance(data, dict):
        if "buses" in data:
            return "case"
        if "lines" in data:
            return "feeder"
        if "edges" in data:
            return "road"
    raise FileFormatError(f"{path}: cannot tell what kind of file this is; pass --kind")


def cmd_validate(args) -> int:
    if not args.files:
        raise UsageError("validate needs at least one FILE")
    bad = 0
    for path in args.files:
        kind = args.kind if args.kind != "auto" else _detect_kind(path)
        problems: list[str] = []
        try:
            if kind == "case":
                problems = [str(v) for v in validate(load_case(path))]
            elif kind == "feeder":
                problems = validate_feeder(load_feeder(path))
            elif kind == "road":
                load_road(path)
            else:
                load_stations(path)
        except FileFormatError as exc:
            problems = [str(exc)]
        if problems:
            bad += 1
            print(f"{path}: invalid {kind}")
            for msg in problems:
                print(f"  - {msg}")
        else:
            print(f"{path}: valid {kind}")
    return 1 if bad else 0


def cmd_solve_pf(args) -> int:
    if not args.case:
        raise UsageError("solve-pf needs a CASE file")
    network = load_case(args.case)
    injections: dict[int, tuple[float, float]] = {}
    for parts in _kv_pairs(args.load, "--load", 2, 3):
        try:
            bus, p = int(parts[0]), float(parts[1])
            q = float(parts[2]) if len(parts) > 2 else 0.0
        except ValueError:
            raise UsageError(f"bad --load {':'.join(parts)!r}") from None
        p0, q0 = injections.get(bus, (0.0, 0.0))
        injections[bus] = (p0 + p, q0 + q)
    opts = PfOptions(
        tol=args.tol if args.tol is not None else 1e-8,
        max_iter=args.max_iter if args.max_iter is not None else 30,
        enforce_q_limits=bool(args.enforce_q_limits),
    )
    sol = solve_nr(network, injections, opts)
    sentinel = args.sentinel if args.sentinel is not None else 0.01
    v_out = export_voltages(sol, sentinel)
    # a collapsed iterate's angles mean nothing; report zeros alongside the sentinel
    v_ang = np.zeros_like(sol.v_ang) if sol.collapsed else sol.v_ang
    status = "converged" if sol.converged else f"COLLAPSED ({sol.reason})"
    print(f"# {status}: iterations={sol.iterations} mismatch={sol.mismatch_norm:.3e}")
    print("bus_id,v_mag_pu,v_ang_rad")
    for bus, vm, va in zip(sol.bus_ids, v_out, v_ang):
        print(f"{bus},{vm:.12f},{va:.12f}")
    viol = count_violations(dict(zip(sol.bus_ids, v_out.tolist())), ViolationBand())
    print(f"# violations outside [0.95, 1.05]: {viol.count}")
    if args.out:
        export_voltage_table(sol.bus_ids, v_out, v_ang, args.out)
    if args.geojson:
        fc = export_geojson(dict(zip(sol.bus_ids, v_out.tolist())), bus_coords(network))
        write_geojson(fc, args.geojson)
    return 0


def cmd_solve_feeder(args) -> int:
    if not args.feeder:
        raise UsageError("solve-feeder needs a FEEDER file")
    feeder = load_feeder(args.feeder)
    kw = args.per_vehicle_kw if args.per_vehicle_kw is not None else 150.0
    if args.station and (args.n_stations is not None or args.n_vehicles is not None):
        raise UsageError("use either --station or --n-stations/--n-vehicles, not both")
    if args.station:
        pairs = _kv_pairs(args.station, "--station", 2, 2)
        try:
            placement = StationPlacement(tuple(int(a) for a, _ in pairs), tuple(int(b) for _, b in pairs), kw)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    elif args.n_stations is not None:
        placement = sample_placement(feeder, args.n_stations, args.n_vehicles or 0, args.seed or 0, kw)
    else:
        placement = StationPlacement(per_vehicle_kw=kw)
    res = solve_fbs(
        feeder,
        placement,
        tol=args.tol if args.tol is not None else 1e-10,
        max_iter=args.max_iter if args.max_iter is not None else 100,
    )
    print(f"# {'converged' if res.converged else 'NOT CONVERGED'}: iterations={res.iterations}")
    for node, count in zip(placement.station_nodes, placement.vehicles_per_station):
        print(f"# station at node {node}: {count} vehicles, {count * kw:g} kW")
    print("node_id,v_mag_pu")
    for node, vm in zip(res.node_ids, res.v_mag):
        print(f"{node},{vm:.12f}")
    vm = {n: v for n, v in res.voltages().items() if n != feeder.source}
    print(f"# violations outside [0.95, 1.05]: {count_violations(vm).count}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("node_id,v_mag_pu\n")
            for node, v in zip(res.node_ids, res.v_mag):
                fh.write(f"{node},{float(v)!r}\n")
    return 0 if res.converged else 1


def cmd_simulate(args) -> int:
    from gridhaul.config import load_scenario

    cfg_path = args.scenario or args.config
    if not cfg_path:
        raise UsageError("simulate-transmission needs a scenario config (positional or --config)")
    overrides = {
        "rng_seed": args.seed,
        "duration_hours": args.duration_hours,
        "arrival_rate_per_hour": args.arrival_rate,
        "initial_hdevs": args.initial_hdevs,
    }
    loaded = load_scenario(cfg_path, overrides)
    scn = loaded.scenario
    out = Path(args.out or "gridhaul-out")
    out.mkdir(parents=True, exist_ok=True)
    write_snapshots = loaded.write_geojson and not args.no_geojson
    coords = bus_coords(scn.network)
    snap_dir = out / "snapshots"
    if write_snapshots:
        snap_dir.mkdir(exist_ok=True)

    def on_step(step, rec):
        if write_snapshots:
            fc = export_geojson(
                rec.v_mag, coords, scn.band,
                {"step": step, "timestamp": rec.timestamp.isoformat(), "converged": rec.converged,
                 "n_charging": rec.n_charging},
            )
            write_geojson(fc, snap_dir / f"step_{step:05d}.geojson")
        if args.verbose and step % 24 == 0:
            log.info("step %d: %d charging, %d violations", step, rec.n_charging, rec.n_violations)

    records = run_transmission_scenario(scn, on_step)
    export_step_records(records, out / "step_records.csv")
    charging = summarize([r.n_charging for r in records])
    worst = max(r.n_violations for r in records)
    collapsed = sum(not r.converged for r in records)
    print(f"{len(records)} steps written to {out / 'step_records.csv'}")
    print(f"charging simultaneously: min {charging.minimum:g}, median {charging.median:g}, max {charging.maximum:g}")
    print(f"worst step: {worst} buses in violation; collapsed steps: {collapsed}")
    return 0


def cmd_sweep(args) -> int:
    from gridhaul.config import load_sweep_config

    cfg_path = args.sweep or args.config
    if not cfg_path:
        raise UsageError("sweep-distribution needs a sweep config (positional or --config)")
    cfg = load_sweep_config(cfg_path, {"master_seed": args.seed, "samples_per_cell": args.samples})
    result = run_distribution_sweep(
        cfg.feeders,
        cfg.station_counts,
        cfg.vehicle_grid,
        cfg.samples_per_cell,
        cfg.master_seed,
        cfg.band,
        cfg.per_vehicle_kw,
        cfg.reactive_fraction,
        workers=args.workers,
    )
    out = Path(args.out or "sweep.csv")
    export_sweep(result.samples, out)
    print(f"{len(result.samples)} samples written to {out}")
    for cell in result.skipped:
        print(f"skipped {cell.feeder_id}: {cell.n_stations} stations x {cell.n_vehicles} vehicles ({cell.reason})")
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "solve-pf": cmd_solve_pf,
    "solve-feeder": cmd_solve_feeder,
    "simulate-transmission": cmd_simulate,
    "sweep-distribution": cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        _apply_config(args)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"gridhaul: error: {exc}", file=sys.stderr)
        return 2
    except (FileFormatError, InvalidNetworkError, ScenarioError, RadialityError, KeyError, ValueError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"gridhaul: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
