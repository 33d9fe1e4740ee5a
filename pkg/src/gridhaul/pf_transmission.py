"""Newton-Raphson AC power flow in polar coordinates.

Divergence is not an error here: a solve that fails to converge (iteration cap,
singular Jacobian, or an iterate sagging below ``COLLAPSE_VMAG``) comes back as
``collapsed=True`` with the last iterate kept for diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from gridhaul.grid import BusKind, Network, build_admittance, require_valid

# any iterate below this magnitude is treated as collapsing
COLLAPSE_VMAG = 0.3
DEFAULT_SENTINEL = 0.01

Injections = Mapping[int, tuple[float, float]]


@dataclass(frozen=True)
class PfOptions:
    tol: float = 1e-8
    max_iter: int = 30
    flat_start: bool = True
    enforce_q_limits: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass
class PfSolution:
    bus_ids: list[int]
    v_mag: np.ndarray
    v_ang: np.ndarray
    converged: bool
    iterations: int
    mismatch_norm: float
    reason: str = "converged"
    switched_to_pq: list[int] = field(default_factory=list)

    @property
    def collapsed(self) -> bool:
        return not self.converged

    def voltages(self) -> dict[int, float]:
        return dict(zip(self.bus_ids, self.v_mag.tolist()))

    @property
    def v_complex(self) -> np.ndarray:
        return self.v_mag * np.exp(1j * self.v_ang)


@dataclass(frozen=True)
class Mismatch:
    """Per-bus power residuals (pu). Entries with no governing equation are zero:
    slack P and Q, and Q at voltage-controlled buses."""

    dp: np.ndarray
    dq: np.ndarray

    @property
    def norm(self) -> float:
        if self.dp.size == 0:
            return 0.0
        return float(max(np.max(np.abs(self.dp)), np.max(np.abs(self.dq))))


def _scheduled_injection(network: Network, injections: Injections | None) -> np.ndarray:
    s = network.generation_pu() - network.load_pu()
    if injections:
        for bus_id, (p_mw, q_mvar) in injections.items():
            if not network.has_bus(bus_id):
                raise KeyError(f"injection at unknown bus id {bus_id}")
            s[network.index_of(bus_id)] -= complex(p_mw, q_mvar) / network.base_mva
    return s


def _bus_sets(network: Network) -> tuple[int, np.ndarray, np.ndarray]:
    kinds = [b.kind for b in network.buses]
    ref = kinds.index(BusKind.SLACK)
    pv = np.array([i for i, k in enumerate(kinds) if k is BusKind.PV], dtype=int)
    pq = np.array([i for i, k in enumerate(kinds) if k is BusKind.PQ], dtype=int)
    return ref, pv, pq


def compute_mismatch(
    network: Network,
    injections: Injections | None,
    v_mag,
    v_ang,
    check: bool = True,
) -> Mismatch:
    """Calculated minus scheduled injection at every bus, for the given voltages."""
    v_mag = np.asarray(v_mag, dtype=float)
    v_ang = np.asarray(v_ang, dtype=float)
    n = network.n_bus
    if v_mag.shape != (n,) or v_ang.shape != (n,):
        raise ValueError(f"voltage vectors must have length {n}, got {v_mag.shape} and {v_ang.shape}")
    ybus = build_admittance(network, check=check)
    v = v_mag * np.exp(1j * v_ang)
    mis = v * np.conj(ybus @ v) - _scheduled_injection(network, injections)
    ref, pv, pq = _bus_sets(network)
    dp = mis.real.copy()
    dq = mis.imag.copy()
    dp[ref] = 0.0
    dq[ref] = 0.0
    dq[pv] = 0.0
    return Mismatch(dp, dq)


def _jacobian(ybus, v, pvpq, pq):
    ibus = ybus @ v
    vnorm = v / np.abs(v)
    diag_v = sp.diags(v)
    ds_dvm = sp.csr_matrix(diag_v @ (ybus @ sp.diags(vnorm)).conj() + sp.diags(np.conj(ibus) * vnorm))
    ds_dva = sp.csr_matrix(1j * diag_v @ (sp.diags(ibus) - ybus @ diag_v).conj())
    j11 = ds_dva[pvpq][:, pvpq].real
    j12 = ds_dvm[pvpq][:, pq].real
    j21 = ds_dva[pq][:, pvpq].imag
    j22 = ds_dvm[pq][:, pq].imag
    return sp.bmat([[j11, j12], [j21, j22]], format="csc")


def _newton(ybus, sbus, v, ref, pv, pq, opts: PfOptions):
    """Core iteration. Returns (v, converged, iterations, norm, reason).

    ``iterations`` counts mismatch evaluations, so an exact starting point
    reports 1 and at most ``max_iter`` Newton updates are taken.
    """
    pvpq = np.concatenate([pv, pq])
    npvpq = len(pvpq)
    va = np.angle(v)
    vm = np.abs(v)
    it = 0
    while True:
        mis = v * np.conj(ybus @ v) - sbus
        f = np.concatenate([mis[pvpq].real, mis[pq].imag])
        norm = float(np.max(np.abs(f))) if f.size else 0.0
        it += 1
        if not math.isfinite(norm):
            return v, False, it, norm, "diverged"
        if norm <= opts.tol:
            return v, True, it, norm, "converged"
        if it > opts.max_iter:
            return v, False, it, norm, "max_iter"
        jac = _jacobian(ybus, v, pvpq, pq)
        try:
            dx = spla.splu(jac).solve(-f)
        except RuntimeError:
            return v, False, it, norm, "singular"
        if not np.all(np.isfinite(dx)):
            return v, False, it, norm, "singular"
        va[pvpq] += dx[:npvpq]
        vm[pq] += dx[npvpq:]
        v = vm * np.exp(1j * va)
        if np.any(vm < COLLAPSE_VMAG):
            mis = v * np.conj(ybus @ v) - sbus
            f = np.concatenate([mis[pvpq].real, mis[pq].imag])
            return v, False, it + 1, float(np.max(np.abs(f))), "low_voltage"


def solve_nr(
    network: Network,
    injections: Injections | None = None,
    opts: PfOptions | None = None,
    initial: tuple[np.ndarray, np.ndarray] | None = None,
) -> PfSolution:
    """Solve the AC power flow for ``network`` with extra per-bus loads.

    ``injections`` maps bus id to additional (MW, MVAr) load. ``initial`` is
    a (v_mag, v_ang) warm start, used only when ``opts.flat_start`` is False.
    Slack and PV magnitudes are always reset to their setpoints.
    """
    opts = opts or PfOptions()
    require_valid(network)
    ybus = build_admittance(network, check=False)
    sbus = _scheduled_injection(network, injections)
    ref, pv, pq = _bus_sets(network)
    vset = np.array([b.v_set for b in network.buses])

    if opts.flat_start or initial is None:
        vm = np.ones(network.n_bus)
        va = np.zeros(network.n_bus)
    else:
        vm = np.array(initial[0], dtype=float, copy=True)
        va = np.array(initial[1], dtype=float, copy=True)
        if vm.shape != (network.n_bus,) or va.shape != (network.n_bus,):
            raise ValueError("warm start vectors do not match bus count")
    vm[ref] = vset[ref]
    vm[pv] = vset[pv]
    va[ref] = 0.0
    v = vm * np.exp(1j * va)

    v, converged, iters, norm, reason = _newton(ybus, sbus, v, ref, pv, pq, opts)
    switched: list[int] = []
    total_iters = iters

    if converged and opts.enforce_q_limits:
        qmin, qmax = _q_limits(network)
        while True:
            # generator output = calculated injection + scheduled load
            qg = (v * np.conj(ybus @ v)).imag - sbus.imag
            over = [i for i in pv if qg[i] > qmax[i] + opts.tol]
            under = [i for i in pv if qg[i] < qmin[i] - opts.tol]
            if not over and not under:
                break
            for i in over:
                sbus[i] = complex(sbus[i].real, sbus[i].imag + qmax[i])
            for i in under:
                sbus[i] = complex(sbus[i].real, sbus[i].imag + qmin[i])
            flipped = set(over) | set(under)
            switched += [network.buses[i].id for i in sorted(flipped)]
            pv = np.array([i for i in pv if i not in flipped], dtype=int)
            pq = np.sort(np.concatenate([pq, np.array(sorted(flipped), dtype=int)]))
            v, converged, iters, norm, reason = _newton(ybus, sbus, v, ref, pv, pq, opts)
            total_iters += iters
            if not converged:
                break

    return PfSolution(
        bus_ids=network.bus_ids,
        v_mag=np.abs(v),
        v_ang=np.angle(v),
        converged=converged,
        iterations=total_iters,
        mismatch_norm=norm,
        reason=reason,
        switched_to_pq=switched,
    )


def _q_limits(network: Network) -> tuple[np.ndarray, np.ndarray]:
    """Per-bus generator reactive limits (pu of generation), summed over units."""
    qmin = np.zeros(network.n_bus)
    qmax = np.zeros(network.n_bus)
    has_gen = np.zeros(network.n_bus, dtype=bool)
    for g in network.generators:
        i = network.index_of(g.bus)
        qmin[i] += g.q_min / network.base_mva
        qmax[i] += g.q_max / network.base_mva
        has_gen[i] = True
    qmin[~has_gen] = -np.inf
    qmax[~has_gen] = np.inf
    return qmin, qmax


def export_voltages(solution: PfSolution, collapse_sentinel: float = DEFAULT_SENTINEL) -> np.ndarray:
    """Per-bus magnitudes, or the sentinel everywhere if the solve collapsed."""
    if solution.collapsed:
        return np.full(len(solution.v_mag), float(collapse_sentinel))
    return solution.v_mag.copy()
