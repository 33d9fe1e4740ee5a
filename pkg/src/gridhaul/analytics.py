"""Voltage-violation counting and the summary statistics reported for runs."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence


@dataclass(frozen=True)
class ViolationBand:
    lower: float = 0.95
    upper: float = 1.05

    def __post_init__(self):
        if not (0 < self.lower < self.upper):
            raise ValueError(f"band must satisfy 0 < lower < upper, got [{self.lower}, {self.upper}]")

    def violates(self, v: float) -> bool:
        # band edges are inside the band
        return v < self.lower or v > self.upper


@dataclass(frozen=True)
class ViolationCount:
    count: int
    buses: list

    def __iter__(self):
        yield self.count
        yield self.buses


def count_violations(v_mag: Sequence[float] | Mapping, band: ViolationBand | None = None) -> ViolationCount:
    """Count buses outside ``band``.

    ``v_mag`` is either a mapping of bus id to magnitude or a sequence, in
    which case the reported ids are positions.
    """
    band = band or ViolationBand()
    pairs: Iterable = v_mag.items() if isinstance(v_mag, Mapping) else enumerate(v_mag)
    bad = []
    for bus, v in pairs:
        v = float(v)
        if not math.isfinite(v):
            raise ValueError(f"non-finite voltage magnitude at bus {bus}")
        if band.violates(v):
            bad.append(bus)
    return ViolationCount(len(bad), bad)


@dataclass(frozen=True)
class SummaryStats:
    minimum: float
    maximum: float
    median: float
    mean: float
    std_dev: float  # population

    def as_row(self) -> dict[str, float]:
        return {
            "Minimum": self.minimum,
            "Maximum": self.maximum,
            "Median": self.median,
            "Mean": self.mean,
            "Standard Deviation": self.std_dev,
        }


def summarize(series: Sequence[float]) -> SummaryStats:
    values = [float(x) for x in series]
    if not values:
        raise ValueError("cannot summarize an empty series")
    return SummaryStats(
        minimum=min(values),
        maximum=max(values),
        median=statistics.median(values),
        mean=statistics.fmean(values),
        std_dev=statistics.pstdev(values),
    )


def histogram(series: Iterable[float], bin_width: float) -> dict[float, int]:
    """Counts per half-open bin ``[k*w, (k+1)*w)``, keyed by the bin's lower edge.

    Only non-empty bins appear; keys are sorted.
    """
    if not bin_width > 0:
        raise ValueError(f"bin_width must be > 0, got {bin_width}")
    counts: dict[int, int] = {}
    for x in series:
        k = math.floor(x / bin_width)
        counts[k] = counts.get(k, 0) + 1
    return {k * bin_width: counts[k] for k in sorted(counts)}


@dataclass(frozen=True)
class FleetBin:
    lower: float
    upper: float
    n_records: int
    median: float
    maximum: int


def violations_vs_fleet(records: Sequence, fleet_bins: float | Sequence[float]) -> list[FleetBin]:
    """Median and worst-case violation count grouped by simultaneous charging.

    ``fleet_bins`` is either a bin width or an increasing list of edges; a
    record falls in ``[edge_i, edge_{i+1})``. Records outside the edges and
    bins without records are left out.
    """
    if not records:
        raise ValueError("no records to bin")
    groups: dict[int, list[int]] = {}
    if isinstance(fleet_bins, (int, float)):
        width = float(fleet_bins)
        if not width > 0:
            raise ValueError("bin width must be > 0")
        for r in records:
            groups.setdefault(math.floor(r.n_charging / width), []).append(r.n_violations)
        bounds = {k: (k * width, (k + 1) * width) for k in groups}
    else:
        edges = [float(e) for e in fleet_bins]
        if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("bin edges must be strictly increasing with at least two entries")
        for r in records:
            for k in range(len(edges) - 1):
                if edges[k] <= r.n_charging < edges[k + 1]:
                    groups.setdefault(k, []).append(r.n_violations)
                    break
        bounds = {k: (edges[k], edges[k + 1]) for k in groups}
    return [
        FleetBin(
            lower=bounds[k][0],
            upper=bounds[k][1],
            n_records=len(groups[k]),
            median=statistics.median(groups[k]),
            maximum=max(groups[k]),
        )
        for k in sorted(groups)
    ]
