"""Heavy-duty electric vehicle fleet and power grid co-simulation.

Vehicles move over a road graph, charge at stations attached to grid buses,
and the resulting loads are fed into native AC power-flow solvers (Newton-Raphson
for meshed transmission networks, forward-backward sweep for radial feeders).
"""

from gridhaul.grid import Branch, Bus, BusKind, Generator, Network, build_admittance, validate
from gridhaul.pf_transmission import PfOptions, PfSolution, compute_mismatch, export_voltages, solve_nr
from gridhaul.pf_distribution import Feeder, StationPlacement, order_radial, sample_placement, solve_fbs
from gridhaul.road import RoadGraph, leg_distances, shortest_path
from gridhaul.analytics import (
    SummaryStats,
    ViolationBand,
    count_violations,
    histogram,
    summarize,
    violations_vs_fleet,
)

__version__ = "0.1.0"

__all__ = [
    "Branch",
    "Bus",
    "BusKind",
    "Feeder",
    "Generator",
    "Network",
    "PfOptions",
    "PfSolution",
    "RoadGraph",
    "StationPlacement",
    "SummaryStats",
    "ViolationBand",
    "build_admittance",
    "compute_mismatch",
    "count_violations",
    "export_voltages",
    "histogram",
    "leg_distances",
    "order_radial",
    "sample_placement",
    "shortest_path",
    "solve_fbs",
    "solve_nr",
    "summarize",
    "validate",
    "violations_vs_fleet",
]
