"""Per-bus background time series (load, wind, solar) from CSV files.

Load files have columns ``timestamp,bus_id,p_mw,q_mvar``; generation files
``timestamp,bus_id,p_mw``. Values between samples are linearly interpolated.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from gridhaul._files import FileFormatError


def parse_time(text: str) -> datetime:
    t = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    # naive timestamps are taken as UTC so mixed files still compare
    return t if t.tzinfo is not None else t.replace(tzinfo=timezone.utc)


def format_time(t: datetime) -> str:
    if t.tzinfo is not None and t.utcoffset().total_seconds() == 0:
        return t.replace(tzinfo=None).isoformat()
    return t.isoformat()


@dataclass
class BusSeries:
    times: np.ndarray  # POSIX seconds, increasing
    p: np.ndarray
    q: np.ndarray

    def at(self, t: float) -> tuple[float, float]:
        return float(np.interp(t, self.times, self.p)), float(np.interp(t, self.times, self.q))


@dataclass
class TimeSeries:
    kind: str  # "load" or "generation"
    buses: dict[int, BusSeries] = field(default_factory=dict)

    def at(self, when: datetime) -> dict[int, tuple[float, float]]:
        t = when.timestamp()
        return {bus: s.at(t) for bus, s in sorted(self.buses.items())}

    def uncovered(self, start: datetime, end: datetime) -> list[int]:
        """Bus ids whose samples do not span ``[start, end]``."""
        a, b = start.timestamp(), end.timestamp()
        return sorted(bus for bus, s in self.buses.items() if s.times[0] > a or s.times[-1] < b)


def read_series(path: str | Path, kind: str = "load") -> TimeSeries:
    if kind not in ("load", "generation"):
        raise ValueError(f"kind must be 'load' or 'generation', got {kind!r}")
    required = ["timestamp", "bus_id", "p_mw"] + (["q_mvar"] if kind == "load" else [])
    rows: dict[int, list[tuple[float, float, float]]] = {}
    path = Path(path)
    try:
        handle = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise FileFormatError(f"{path}: cannot read file ({exc.strerror})") from exc
    with handle:
        reader = csv.DictReader(handle)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in required if c not in header]
        if missing:
            raise FileFormatError(f"{path}:1: missing column(s) {', '.join(missing)}")
        reader.fieldnames = header
        for row in reader:
            line = reader.line_num
            try:
                t = parse_time(row["timestamp"]).timestamp()
            except (ValueError, AttributeError):
                raise FileFormatError(f"{path}:{line}: timestamp: not ISO-8601 ({row['timestamp']!r})") from None
            try:
                bus = int(row["bus_id"])
            except (ValueError, TypeError):
                raise FileFormatError(f"{path}:{line}: bus_id: expected an integer ({row['bus_id']!r})") from None
            vals = []
            for col in required[2:]:
                try:
                    vals.append(float(row[col]))
                except (ValueError, TypeError):
                    raise FileFormatError(f"{path}:{line}: {col}: expected a number ({row[col]!r})") from None
            p = vals[0]
            q = vals[1] if kind == "load" else 0.0
            rows.setdefault(bus, []).append((t, p, q))
    out = TimeSeries(kind)
    for bus, samples in rows.items():
        samples.sort(key=lambda s: s[0])
        times = np.array([s[0] for s in samples])
        if np.any(np.diff(times) <= 0):
            raise FileFormatError(f"{path}: bus {bus}: duplicate timestamps")
        out.buses[bus] = BusSeries(times, np.array([s[1] for s in samples]), np.array([s[2] for s in samples]))
    return out


def write_series(path: str | Path, kind: str, samples) -> None:
    """Write ``(timestamp, bus_id, p_mw[, q_mvar])`` tuples in the CSV layout above."""
    header = ["timestamp", "bus_id", "p_mw"] + (["q_mvar"] if kind == "load" else [])
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in samples:
            t, *rest = row
            w.writerow([format_time(t) if isinstance(t, datetime) else t, *rest])
