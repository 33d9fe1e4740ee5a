"""Per-unit transmission network model and bus-admittance matrix construction.

All electrical quantities inside :class:`Network` are stored the way they are
written in case files (loads in MW/MVAr, impedances in per-unit). The MW to
per-unit conversion happens once, in :meth:`Network.load_pu`, so solvers only
ever see per-unit values.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from gridhaul._files import FileFormatError, read_json, root


class BusKind(str, enum.Enum):
    SLACK = "slack"
    PV = "pv"
    PQ = "pq"

    @classmethod
    def parse(cls, text: str) -> "BusKind":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown bus kind {text!r}; expected slack, pv or pq") from None


@dataclass(frozen=True)
class Bus:
    id: int
    kind: BusKind = BusKind.PQ
    base_kv: float = 1.0
    v_set: float = 1.0
    load_p: float = 0.0  # MW
    load_q: float = 0.0  # MVAr
    shunt_g: float = 0.0  # pu
    shunt_b: float = 0.0  # pu
    coord: tuple[float, float] | None = None  # (lat, lon) degrees
    name: str | None = None


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_charging: float = 0.0
    tap: float = 1.0
    shift: float = 0.0  # radians
    in_service: bool = True


@dataclass(frozen=True)
class Generator:
    bus: int
    p_set: float = 0.0  # MW
    q_min: float = -math.inf  # MVAr
    q_max: float = math.inf
    v_set: float = 1.0


@dataclass(frozen=True)
class Violation:
    """One invariant failure found by :func:`validate`."""

    element: str  # "network", "bus", "branch" or "generator"
    ref: object
    reason: str

    def __str__(self) -> str:
        if self.ref is None:
            return f"{self.element}: {self.reason}"
        return f"{self.element} {self.ref}: {self.reason}"


@dataclass(frozen=True)
class Network:
    base_mva: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...] = ()
    generators: tuple[Generator, ...] = ()
    _index: dict[int, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "generators", tuple(self.generators))
        index: dict[int, int] = {}
        for i, bus in enumerate(self.buses):
            index.setdefault(bus.id, i)
        object.__setattr__(self, "_index", index)

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]

    def index_of(self, bus_id: int) -> int:
        try:
            return self._index[bus_id]
        except KeyError:
            raise KeyError(f"unknown bus id {bus_id}") from None

    def has_bus(self, bus_id: int) -> bool:
        return bus_id in self._index

    def bus(self, bus_id: int) -> Bus:
        return self.buses[self.index_of(bus_id)]

    def load_pu(self) -> np.ndarray:
        """Complex per-unit load at every bus, in bus order."""
        return np.array([complex(b.load_p, b.load_q) for b in self.buses]) / self.base_mva

    def generation_pu(self) -> np.ndarray:
        """Scheduled real generation (pu) summed per bus."""
        out = np.zeros(self.n_bus)
        for g in self.generators:
            out[self.index_of(g.bus)] += g.p_set / self.base_mva
        return out

    def with_loads(self, loads: dict[int, tuple[float, float]]) -> "Network":
        """Copy with the given buses' (MW, MVAr) loads replaced."""
        buses = []
        for b in self.buses:
            if b.id in loads:
                p, q = loads[b.id]
                b = replace(b, load_p=float(p), load_q=float(q))
            buses.append(b)
        return Network(self.base_mva, tuple(buses), self.branches, self.generators)

    def to_dict(self) -> dict:
        def bus_dict(b: Bus) -> dict:
            d = {
                "id": b.id,
                "kind": b.kind.value,
                "base_kv": b.base_kv,
                "v_set": b.v_set,
                "load_p": b.load_p,
                "load_q": b.load_q,
                "shunt_g": b.shunt_g,
                "shunt_b": b.shunt_b,
            }
            if b.coord is not None:
                d["coord"] = list(b.coord)
            if b.name is not None:
                d["name"] = b.name
            return d

        def gen_dict(g: Generator) -> dict:
            d = {"bus": g.bus, "p_set": g.p_set, "v_set": g.v_set}
            if math.isfinite(g.q_min):
                d["q_min"] = g.q_min
            if math.isfinite(g.q_max):
                d["q_max"] = g.q_max
            return d

        return {
            "base_mva": self.base_mva,
            "buses": [bus_dict(b) for b in self.buses],
            "branches": [asdict(br) for br in self.branches],
            "generators": [gen_dict(g) for g in self.generators],
        }


def validate(network: Network) -> list[Violation]:
    """Return every invariant violation in ``network``; empty when valid."""
    report: list[Violation] = []
    if not (network.base_mva > 0 and math.isfinite(network.base_mva)):
        report.append(Violation("network", None, f"base_mva must be > 0, got {network.base_mva}"))
    if not network.buses:
        report.append(Violation("network", None, "no buses"))
        return report

    seen: set[int] = set()
    for b in network.buses:
        if b.id in seen:
            report.append(Violation("bus", b.id, "duplicate bus id"))
        seen.add(b.id)
        if not (b.base_kv > 0):
            report.append(Violation("bus", b.id, f"base_kv must be > 0, got {b.base_kv}"))
        if not (math.isfinite(b.load_p) and math.isfinite(b.load_q)):
            report.append(Violation("bus", b.id, "load_p/load_q must be finite"))
        if not (math.isfinite(b.shunt_g) and math.isfinite(b.shunt_b)):
            report.append(Violation("bus", b.id, "shunt_g/shunt_b must be finite"))
        if b.kind is not BusKind.PQ and not (b.v_set > 0):
            report.append(Violation("bus", b.id, f"v_set must be > 0, got {b.v_set}"))

    slacks = [b.id for b in network.buses if b.kind is BusKind.SLACK]
    if not slacks:
        report.append(Violation("network", None, "no slack bus"))
    elif len(slacks) > 1:
        report.append(Violation("network", None, f"multiple slack buses: {slacks}"))

    for k, br in enumerate(network.branches):
        tag = f"#{k} ({br.from_bus}->{br.to_bus})"
        for end in (br.from_bus, br.to_bus):
            if end not in seen:
                report.append(Violation("branch", tag, f"references nonexistent bus {end}"))
        if br.from_bus == br.to_bus:
            report.append(Violation("branch", tag, "from_bus equals to_bus"))
        if br.in_service and br.r == 0 and br.x == 0:
            report.append(Violation("branch", tag, "zero series impedance"))
        if not (br.tap > 0):
            report.append(Violation("branch", tag, f"tap must be > 0, got {br.tap}"))

    kinds = {b.id: b.kind for b in network.buses}
    for k, g in enumerate(network.generators):
        tag = f"#{k} (bus {g.bus})"
        if g.bus not in kinds:
            report.append(Violation("generator", tag, f"references nonexistent bus {g.bus}"))
        elif kinds[g.bus] is BusKind.PQ:
            report.append(Violation("generator", tag, "generator bus must be slack or PV"))
        if g.q_min > g.q_max:
            report.append(Violation("generator", tag, f"q_min {g.q_min} > q_max {g.q_max}"))

    unreachable = _islands(network)
    if unreachable:
        shown = sorted(unreachable)[:10]
        more = "" if len(unreachable) <= 10 else f" (+{len(unreachable) - 10} more)"
        report.append(Violation("network", None, f"network is not connected; islanded buses {shown}{more}"))
    return report


def _islands(network: Network) -> set[int]:
    ids = {b.id for b in network.buses}
    adj: dict[int, list[int]] = {i: [] for i in ids}
    for br in network.branches:
        if br.in_service and br.from_bus in ids and br.to_bus in ids:
            adj[br.from_bus].append(br.to_bus)
            adj[br.to_bus].append(br.from_bus)
    start = network.buses[0].id
    seen = {start}
    stack = [start]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return ids - seen


class InvalidNetworkError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("invalid network: " + "; ".join(str(v) for v in violations))


def require_valid(network: Network) -> None:
    report = validate(network)
    if report:
        raise InvalidNetworkError(report)


def build_admittance(network: Network, check: bool = True) -> sp.csr_matrix:
    """Sparse complex bus-admittance matrix, rows/columns in bus order.

    Branches use the pi model with the off-nominal tap and phase shift on the
    from side: ``a = tap * exp(j*shift)``.
    """
    if check:
        require_valid(network)
    n = network.n_bus
    rows: list[int] = []
    cols: list[int] = []
    vals: list[complex] = []
    for br in network.branches:
        if not br.in_service:
            continue
        f = network.index_of(br.from_bus)
        t = network.index_of(br.to_bus)
        ys = 1.0 / complex(br.r, br.x)
        bc = 1j * br.b_charging / 2.0
        a = br.tap * complex(math.cos(br.shift), math.sin(br.shift))
        rows += [f, f, t, t]
        cols += [f, t, f, t]
        vals += [(ys + bc) / (br.tap * br.tap), -ys / a.conjugate(), -ys / a, ys + bc]
    for i, b in enumerate(network.buses):
        if b.shunt_g or b.shunt_b:
            rows.append(i)
            cols.append(i)
            vals.append(complex(b.shunt_g, b.shunt_b))
    # duplicates are summed by the COO -> CSR conversion
    return sp.coo_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(n, n)).tocsr()


def load_case(path: str | Path) -> Network:
    """Read a JSON case file (``base_mva``, ``buses``, ``branches``, ``generators``)."""
    doc = root(read_json(path), path)
    base_mva = doc.get("base_mva")
    buses = []
    for item in doc.items("buses"):
        try:
            kind = BusKind.parse(item.get("kind", "str", "pq"))
        except ValueError as exc:
            raise item.fail("kind", str(exc)) from None
        coord = item.raw("coord")
        if coord is not None:
            if not (isinstance(coord, list) and len(coord) == 2 and all(isinstance(c, (int, float)) for c in coord)):
                raise item.fail("coord", "expected [latitude, longitude]")
            coord = (float(coord[0]), float(coord[1]))
        buses.append(
            Bus(
                id=item.get("id", "int"),
                kind=kind,
                base_kv=item.get("base_kv", default=1.0),
                v_set=item.get("v_set", default=1.0),
                load_p=item.get("load_p", default=0.0),
                load_q=item.get("load_q", default=0.0),
                shunt_g=item.get("shunt_g", default=0.0),
                shunt_b=item.get("shunt_b", default=0.0),
                coord=coord,
                name=item.get("name", "str", None),
            )
        )
    branches = [
        Branch(
            from_bus=item.get("from_bus", "int"),
            to_bus=item.get("to_bus", "int"),
            r=item.get("r"),
            x=item.get("x"),
            b_charging=item.get("b_charging", default=0.0),
            tap=item.get("tap", default=1.0),
            shift=item.get("shift", default=0.0),
            in_service=item.get("in_service", "bool", True),
        )
        for item in doc.items("branches", required=False)
    ]
    generators = [
        Generator(
            bus=item.get("bus", "int"),
            p_set=item.get("p_set", default=0.0),
            q_min=item.get("q_min", default=-math.inf),
            q_max=item.get("q_max", default=math.inf),
            v_set=item.get("v_set", default=1.0),
        )
        for item in doc.items("generators", required=False)
    ]
    return Network(base_mva, tuple(buses), tuple(branches), tuple(generators))


def save_case(network: Network, path: str | Path) -> None:
    Path(path).write_text(json.dumps(network.to_dict(), indent=2) + "\n", encoding="utf-8")


def bus_coords(network: Network) -> dict[int, tuple[float, float]]:
    return {b.id: b.coord for b in network.buses if b.coord is not None}


def iter_kind(network: Network, kinds: Iterable[BusKind]) -> list[int]:
    """Bus positions (not ids) whose kind is in ``kinds``."""
    wanted = set(kinds)
    return [i for i, b in enumerate(network.buses) if b.kind in wanted]


__all__ = [
    "Branch",
    "Bus",
    "BusKind",
    "FileFormatError",
    "Generator",
    "InvalidNetworkError",
    "Network",
    "Violation",
    "build_admittance",
    "bus_coords",
    "load_case",
    "require_valid",
    "save_case",
    "validate",
]
