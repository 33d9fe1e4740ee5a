"""Result files: step-record and sweep CSVs, GeoJSON voltage snapshots."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence, TextIO

from gridhaul._files import FileFormatError
from gridhaul.analytics import ViolationBand
from gridhaul.engine import StepRecord, SweepSample
from gridhaul.timeseries import format_time, parse_time

STEP_COLUMNS = ["timestamp", "n_charging", "n_idle", "n_moving", "n_departed", "converged", "n_violations"]
SWEEP_COLUMNS = ["feeder_id", "n_stations", "n_vehicles", "placement_seed", "n_violations", "converged"]


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1"):
        return True
    if low in ("false", "0"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _open_out(target: str | Path | TextIO):
    if isinstance(target, (str, Path)):
        try:
            return open(target, "w", newline="", encoding="utf-8"), True
        except OSError as exc:
            raise OSError(f"cannot write {target}: {exc.strerror}") from exc
    return target, False


def export_step_records(records: Iterable[StepRecord], target: str | Path | TextIO) -> None:
    fh, owned = _open_out(target)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STEP_COLUMNS)
        for r in records:
            w.writerow(
                [
                    format_time(r.timestamp) if r.timestamp is not None else "",
                    r.n_charging,
                    r.n_idle,
                    r.n_moving,
                    r.n_departed,
                    "true" if r.converged else "false",
                    r.n_violations,
                ]
            )
    finally:
        if owned:
            fh.close()


def step_records_csv(records: Iterable[StepRecord]) -> str:
    buf = io.StringIO()
    export_step_records(records, buf)
    return buf.getvalue()


def _rows(source: str | Path | TextIO, columns: Sequence[str]):
    if isinstance(source, (str, Path)):
        fh = open(source, newline="", encoding="utf-8")
        name = str(source)
    else:
        fh, name = source, "<stream>"
    try:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(columns):
            raise FileFormatError(f"{name}:1: expected header {','.join(columns)}")
        for row in reader:
            yield name, reader.line_num, row
    finally:
        if isinstance(source, (str, Path)):
            fh.close()


def read_step_records(source: str | Path | TextIO) -> list[StepRecord]:
    out = []
    for name, line, row in _rows(source, STEP_COLUMNS):
        try:
            out.append(
                StepRecord(
                    timestamp=parse_time(row["timestamp"]) if row["timestamp"] else None,
                    n_charging=int(row["n_charging"]),
                    n_idle=int(row["n_idle"]),
                    n_moving=int(row["n_moving"]),
                    n_departed=int(row["n_departed"]),
                    converged=_bool(row["converged"]),
                    n_violations=int(row["n_violations"]),
                )
            )
        except ValueError as exc:
            raise FileFormatError(f"{name}:{line}: {exc}") from None
    return out


def export_sweep(samples: Iterable[SweepSample], target: str | Path | TextIO) -> None:
    fh, owned = _open_out(target)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for s in samples:
            w.writerow(
                [s.feeder_id, s.n_stations, s.n_vehicles, s.placement_seed, s.n_violations,
                 "true" if s.converged else "false"]
            )
    finally:
        if owned:
            fh.close()


def read_sweep(source: str | Path | TextIO) -> list[SweepSample]:
    out = []
    for name, line, row in _rows(source, SWEEP_COLUMNS):
        try:
            out.append(
                SweepSample(
                    row["feeder_id"],
                    int(row["n_stations"]),
                    int(row["n_vehicles"]),
                    int(row["placement_seed"]),
                    int(row["n_violations"]),
                    _bool(row["converged"]),
                )
            )
        except ValueError as exc:
            raise FileFormatError(f"{name}:{line}: {exc}") from None
    return out


def export_geojson(
    v_mag: Mapping[int, float],
    coords: Mapping[int, tuple[float, float]],
    band: ViolationBand | None = None,
    properties: Mapping | None = None,
) -> dict:
    """FeatureCollection with one Point per bus that has coordinates.

    ``coords`` holds (latitude, longitude); GeoJSON positions are written as
    [longitude, latitude]. Features are ordered by bus id and each feature's
    keys in a fixed order, so equal inputs serialize identically.
    """
    band = band or ViolationBand()
    features = []
    omitted = 0
    for bus in sorted(v_mag):
        v = float(v_mag[bus])
        if bus not in coords or coords[bus] is None:
            omitted += 1
            continue
        lat, lon = coords[bus]
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [float(lon), float(lat)]},
                "properties": {"bus_id": bus, "v_pu": v, "violating": band.violates(v)},
            }
        )
    meta = {"band": [band.lower, band.upper], "n_buses": len(v_mag), "omitted_without_coords": omitted}
    if properties:
        meta.update(properties)
    return {"type": "FeatureCollection", "metadata": meta, "features": features}


def write_geojson(collection: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(collection, separators=(",", ":")) + "\n", encoding="utf-8")


def read_geojson(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("type") != "FeatureCollection":
        raise FileFormatError(f"{path}: not a GeoJSON FeatureCollection")
    return doc


def export_voltage_table(bus_ids, v_mag, v_ang, target: str | Path | TextIO) -> None:
    """``bus_id,v_mag_pu,v_ang_rad`` rows, full float precision."""
    fh, owned = _open_out(target)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bus_id", "v_mag_pu", "v_ang_rad"])
        for b, m, a in zip(bus_ids, v_mag, v_ang):
            w.writerow([b, repr(float(m)), repr(float(a))])
    finally:
        if owned:
            fh.close()
