"""Reference implementations used to check the package.

Nothing here imports solver code from gridhaul; only the plain data classes
are read. Keep these slow and obvious.
"""

from __future__ import annotations

import cmath
import itertools
import math


def dense_ybus(network) -> list[list[complex]]:
    """Admittance matrix built element by element with plain complex numbers."""
    pos = {b.id: i for i, b in enumerate(network.buses)}
    n = len(network.buses)
    y = [[0j] * n for _ in range(n)]
    for br in network.branches:
        if not br.in_service:
            continue
        f, t = pos[br.from_bus], pos[br.to_bus]
        series = 1 / complex(br.r, br.x)
        half_b = complex(0, br.b_charging / 2)
        ratio = cmath.rect(br.tap, br.shift)
        y[f][f] += (series + half_b) / (abs(ratio) ** 2)
        y[t][t] += series + half_b
        y[f][t] += -series / ratio.conjugate()
        y[t][f] += -series / ratio
    for i, b in enumerate(network.buses):
        y[i][i] += complex(b.shunt_g, b.shunt_b)
    return y


def gauss_seidel(network, injections=None, tol=1e-13, max_sweeps=200_000, accel=1.0):
    """Classic Gauss-Seidel power flow; returns (v_mag list, v_ang list).

    PV buses get their reactive power re-estimated each sweep and their
    magnitude pinned back to the setpoint.
    """
    injections = injections or {}
    y = dense_ybus(network)
    n = len(network.buses)
    base = network.base_mva
    s_sched = [0j] * n
    pos = {b.id: i for i, b in enumerate(network.buses)}
    for b in network.buses:
        s_sched[pos[b.id]] -= complex(b.load_p, b.load_q) / base
    for g in network.generators:
        s_sched[pos[g.bus]] += g.p_set / base
    for bus, (p, q) in injections.items():
        s_sched[pos[bus]] -= complex(p, q) / base
    kinds = [b.kind.value for b in network.buses]
    v = [complex(b.v_set if kinds[i] != "pq" else 1.0, 0) for i, b in enumerate(network.buses)]
    for _ in range(max_sweeps):
        worst = 0.0
        for i in range(n):
            if kinds[i] == "slack":
                continue
            p_i = s_sched[i].real
            if kinds[i] == "pv":
                current = sum(y[i][k] * v[k] for k in range(n))
                q_i = -(v[i].conjugate() * current).imag
            else:
                q_i = s_sched[i].imag
            others = sum(y[i][k] * v[k] for k in range(n) if k != i)
            new = (complex(p_i, -q_i) / v[i].conjugate() - others) / y[i][i]
            if kinds[i] == "pv":
                new = cmath.rect(network.buses[i].v_set, cmath.phase(new))
            else:
                new = v[i] + accel * (new - v[i])
            worst = max(worst, abs(new - v[i]))
            v[i] = new
        if worst < tol:
            return [abs(x) for x in v], [cmath.phase(x) for x in v]
    raise RuntimeError("Gauss-Seidel oracle did not converge")


def power_residual(network, v_mag, v_ang, injections=None):
    """Per-bus S_calc - S_sched, straight from the power-balance equations."""
    y = dense_ybus(network)
    n = len(network.buses)
    v = [cmath.rect(m, a) for m, a in zip(v_mag, v_ang)]
    pos = {b.id: i for i, b in enumerate(network.buses)}
    sched = [0j] * n
    for b in network.buses:
        sched[pos[b.id]] -= complex(b.load_p, b.load_q) / network.base_mva
    for g in network.generators:
        sched[pos[g.bus]] += g.p_set / network.base_mva
    for bus, (p, q) in (injections or {}).items():
        sched[pos[bus]] -= complex(p, q) / network.base_mva
    out = []
    for i in range(n):
        s = v[i] * sum(y[i][k] * v[k] for k in range(n)).conjugate()
        out.append(s - sched[i])
    return out


def two_bus_closed_form(p_pu: float, x: float, v1: float = 1.0) -> tuple[float, float] | None:
    """Receiving-end voltage of a lossless line feeding a unity-pf load.

    From |V2|^4 - v1^2 |V2|^2 + (P x)^2 = 0, taking the high-voltage root.
    Returns None past the transfer limit P = v1^2 / (2x).
    """
    disc = v1**4 - 4 * (p_pu * x) ** 2
    if disc < 0:
        return None
    v2 = math.sqrt((v1**2 + math.sqrt(disc)) / 2)
    return v2, -math.asin(p_pu * x / (v1 * v2))


def all_simple_paths(edges: dict, origin, dest):
    """Every simple path by brute force over node permutations."""
    nodes = sorted({n for e in edges for n in e} | {origin, dest}, key=repr)
    if origin == dest:
        yield [origin], 0.0
        return
    inner = [n for n in nodes if n not in (origin, dest)]
    for k in range(len(inner) + 1):
        for mid in itertools.permutations(inner, k):
            path = [origin, *mid, dest]
            total = 0.0
            for a, b in zip(path, path[1:]):
                w = edges.get((a, b), edges.get((b, a)))
                if w is None:
                    break
                total += w
            else:
                yield path, total


def brute_shortest(edges: dict, origin, dest) -> float:
    return min((t for _, t in all_simple_paths(edges, origin, dest)), default=math.inf)


def one_line_feeder(z: complex, s_load: complex, v_source: complex = 1.0, iters: int = 500) -> complex:
    """Node voltage behind a single impedance feeding a constant-power load."""
    v = v_source
    for _ in range(iters):
        v = v_source - z * (s_load / v).conjugate()
    return v
