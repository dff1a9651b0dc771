"""Capacity allocation under a total budget.

* :func:`mu_k_sigma_allocation` gives every edge ``mu + k sigma``.
* :func:`lagrangian_allocation` maximizes the independent-Gaussian
  probability of no saturation, ``prod_i H((c_i - mu_i) / sigma_i)``, for
  unequal sigmas.
* :func:`optimize_envelope` hill-climbs, per congestion threshold ``L``, the
  fraction of a fixed matrix sample whose global congestion stays at or
  below ``L``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import log_ndtr

from .exceptions import AllocationError, StructuralError
from .net import Network, Routing, _check_dims
from .stats import GaussianParams
from .tset import derive_seed

BUDGET_TOL = 1e-9
FLOOR = 1e-6
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class CapacityAllocation:
    capacities: dict[str, float]
    budget: float
    k: float | None = None
    method: str = ""

    def __post_init__(self):
        total = sum(self.capacities.values())
        if abs(total - self.budget) > BUDGET_TOL * max(1.0, abs(self.budget)):
            raise AllocationError(f"capacities sum to {total!r}, not the budget {self.budget!r}")
        bad = [e for e, c in self.capacities.items() if not c > 0]
        if bad:
            raise AllocationError(f"non-positive capacity on edges: {', '.join(bad)}")

    @property
    def edge_ids(self) -> tuple[str, ...]:
        return tuple(self.capacities)

    @property
    def vector(self) -> np.ndarray:
        return np.array(list(self.capacities.values()))

    def apply(self, net: Network) -> Network:
        return net.with_capacities(self.capacities)


def _unpack(params: Mapping[str, GaussianParams]) -> tuple[list[str], np.ndarray, np.ndarray]:
    ids = list(params)
    if not ids:
        raise StructuralError("no edges to allocate")
    mu = np.array([params[e].mu for e in ids], dtype=float)
    sigma = np.array([params[e].sigma for e in ids], dtype=float)
    return ids, mu, sigma


def _fix_sum(c: np.ndarray, budget: float, weights: np.ndarray) -> np.ndarray:
    # spread the floating-point residual in proportion to the weights
    return c + (budget - c.sum()) * weights / weights.sum()


def mu_k_sigma_allocation(params: Mapping[str, GaussianParams], budget: float) -> CapacityAllocation:
    """``c_i = mu_i + k sigma_i`` with ``k = (C - sum mu) / sum sigma``; ``k`` may be negative."""
    ids, mu, sigma = _unpack(params)
    if not sigma.sum() > 0:
        raise AllocationError("mu + k sigma needs sum(sigma) > 0")
    k = (budget - mu.sum()) / sigma.sum()
    c = mu + k * sigma
    bad = [ids[i] for i in np.flatnonzero(c <= 0)]
    if bad:
        raise AllocationError(f"budget {budget} leaves non-positive capacity (k = {k:.4g}) on: {', '.join(bad)}")
    c = _fix_sum(c, budget, sigma)
    return CapacityAllocation(dict(zip(ids, c.tolist())), float(budget), float(k), "mu-k-sigma")


def implied_k(alloc: CapacityAllocation, params: Mapping[str, GaussianParams]) -> float:
    """``k`` recomputed from an allocation's budget."""
    _, mu, sigma = _unpack({e: params[e] for e in alloc.edge_ids})
    return float((alloc.budget - mu.sum()) / sigma.sum())


def log_hazard_ratio(z) -> np.ndarray:
    """``log(h(z) / H(z))`` for the standard normal PDF ``h`` and CDF ``H``; strictly decreasing."""
    z = np.asarray(z, dtype=float)
    return -0.5 * z * z - _LOG_SQRT_2PI - log_ndtr(z)


def _solve_z(target_log: np.ndarray, iterations: int = 200) -> np.ndarray:
    """Solve ``log_hazard_ratio(z) = target_log`` elementwise by bisection."""
    lo = np.full(target_log.shape, -1e12)
    hi = np.full(target_log.shape, 1e4)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        above = log_hazard_ratio(mid) > target_log  # ratio too large: z must grow
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(1.0, np.abs(mid))):
            break
    return 0.5 * (lo + hi)


def lagrangian_allocation(params: Mapping[str, GaussianParams], budget: float,
                          max_iter: int = 10**4) -> CapacityAllocation:
    """Allocation maximizing ``prod_i H((c_i - mu_i) / sigma_i)`` subject to ``sum c_i = C``.

    At the optimum ``h(z_i) / (sigma_i H(z_i))`` is a common value ``lambda``.
    Each ``z_i`` is found by bisection for a given ``lambda``, and
    ``log lambda`` is bisected until the budget is met.
    """
    ids, mu, sigma = _unpack(params)
    if np.any(sigma <= 0):
        raise AllocationError("Lagrangian allocation needs sigma > 0 on every edge")
    if len(ids) == 1:
        return CapacityAllocation({ids[0]: float(budget)}, float(budget), None, "lagrangian")
    log_sigma = np.log(sigma)
    need = budget - mu.sum()

    def spend(t):
        z = _solve_z(t + log_sigma)
        return z, float(sigma @ z)

    lo, hi = -50.0, 50.0  # spend() decreases in t
    for _ in range(200):
        if spend(lo)[1] >= need:
            break
        lo *= 2.0
    for _ in range(200):
        if spend(hi)[1] <= need:
            break
        hi = hi * 2.0 if hi > 0 else 1.0
    z, s = spend(0.5 * (lo + hi))
    it = 0
    tol = BUDGET_TOL * max(1.0, abs(budget))
    while abs(s - need) > tol:
        it += 1
        if it > max_iter:
            raise AllocationError(f"Lagrangian solver did not converge; budget residual {s - need:.3e}")
        mid = 0.5 * (lo + hi)
        z, s = spend(mid)
        if s > need:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * max(1.0, abs(mid)):
            break
    c = mu + sigma * z
    if np.any(c <= 0):
        bad = [ids[i] for i in np.flatnonzero(c <= 0)]
        raise AllocationError(f"budget {budget} leaves non-positive capacity on: {', '.join(bad)}")
    c = _fix_sum(c, budget, sigma)
    if abs(c.sum() - budget) > tol:  # pragma: no cover
        raise AllocationError(f"Lagrangian solver residual {c.sum() - budget:.3e}")
    return CapacityAllocation(dict(zip(ids, c.tolist())), float(budget), None, "lagrangian")


def saturation_probability(alloc: CapacityAllocation, params: Mapping[str, GaussianParams],
                           model: str = "independent-gaussian") -> float:
    """``1 - prod_i H((c_i - mu_i) / sigma_i)`` under independent Gaussian edge loads."""
    if model != "independent-gaussian":
        raise StructuralError("only the independent-gaussian model is available")
    log_ok = 0.0
    for e, c in alloc.capacities.items():
        p = params[e]
        if p.sigma == 0:
            if c <= p.mu:
                return 1.0
            continue
        log_ok += float(log_ndtr((c - p.mu) / p.sigma))
    return float(-math.expm1(log_ok))


# -- envelope ---------------------------------------------------------------

def homogeneous_allocation(edge_ids: Sequence[str], budget: float) -> CapacityAllocation:
    c = budget / len(edge_ids)
    return CapacityAllocation({e: c for e in edge_ids}, float(budget), None, "homogeneous")


def fraction_within(flows: np.ndarray, capacities: np.ndarray, L) -> np.ndarray | float:
    """Fraction of samples with global congestion ``<= L`` for flows ``(m, |E|)``."""
    L = np.atleast_1d(np.asarray(L, dtype=float))
    gc = (flows / capacities).max(axis=1)
    out = (gc[None, :] <= L[:, None]).mean(axis=1)
    return float(out[0]) if out.size == 1 else out


def _project(c: np.ndarray, budget: float, floor: float) -> np.ndarray:
    c = np.maximum(c, floor)
    excess = c - floor
    room = budget - floor * len(c)
    return floor + excess * (room / excess.sum())


def hill_climb(flows: np.ndarray, budget: float, L: float, start: np.ndarray, iterations: int,
               rng: np.random.Generator, step: float | None = None,
               floor: float = FLOOR) -> tuple[np.ndarray, float, np.ndarray]:
    """Accept-if-better local search; returns (allocation, objective, objective after each iteration)."""
    E = flows.shape[1]
    step = 0.02 * budget / E if step is None else step
    c = np.array(start, dtype=float)

    def objective(cap):
        return float(((flows / cap).max(axis=1) <= L).mean())

    best = objective(c)
    trace = np.empty(iterations)
    for it in range(iterations):
        d = rng.standard_normal(E) * step
        cand = _project(c + d - d.mean(), budget, floor)
        val = objective(cand)
        if val > best:
            c, best = cand, val
        trace[it] = best
    return c, best, trace


@dataclass
class EnvelopeResult:
    L: np.ndarray
    envelope: np.ndarray
    best_fraction: np.ndarray  # per L, best of the hill-climb runs at that L
    allocations: list[CapacityAllocation]  # per L, the allocation achieving best_fraction
    homogeneous: np.ndarray
    mu_k_sigma: np.ndarray
    start_fractions: np.ndarray  # (|L|, starts)
    traces: list[list[np.ndarray]] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def restart_gap(self) -> float:
        """Largest per-L difference between the runs from the two starts."""
        return float(np.max(np.ptp(self.start_fractions, axis=1)))


def default_L_grid(flows: np.ndarray, budget: float, points: int = 40) -> np.ndarray:
    """From the smallest achievable congestion to the homogeneous allocation's largest sampled one."""
    lo = float(flows.sum(axis=1).min()) / budget
    hi = float((flows / (budget / flows.shape[1])).max(axis=1).max())
    return np.linspace(lo, hi, points)


def sample_flows(net: Network, f: Routing, matrices) -> np.ndarray:
    """Absolute flow on every edge ``(m, |E|)`` for a matrix stack."""
    _check_dims(net, f)
    D = np.asarray(matrices, dtype=float)
    return D.reshape(len(D), -1) @ f.flow_matrix().T


def optimize_envelope(net: Network, f: Routing, matrices, budget: float, L_grid=None,
                      iterations: int = 10_000, seed: int = 0,
                      params: Mapping[str, GaussianParams] | None = None,
                      floor: float = FLOOR, keep_traces: bool = False) -> EnvelopeResult:
    """Per-threshold best fraction of ``matrices`` with GC ``<= L`` over budget-respecting allocations.

    Each ``L`` is climbed from the homogeneous and the ``mu + k sigma``
    allocations.  ``params`` default to the sample mean and SD of each
    edge's unit-capacity load.  The envelope at ``L`` is the best value any
    of the collected allocations (every per-``L`` optimum and both
    baselines) reaches at ``L``.
    """
    E = net.n_edges
    if budget <= floor * E:
        raise AllocationError(f"budget {budget} is below the positivity floor {floor} x {E} edges")
    flows = sample_flows(net, f, matrices)
    ids = list(net.edge_ids)
    if params is None:
        params = {e: GaussianParams(float(flows[:, k].mean()), float(flows[:, k].std()), "empirical")
                  for k, e in enumerate(ids)}
    homog = homogeneous_allocation(ids, budget)
    mks = mu_k_sigma_allocation({e: params[e] for e in ids}, budget)
    L = default_L_grid(flows, budget) if L_grid is None else np.asarray(L_grid, dtype=float)
    starts = (homog.vector, np.maximum(mks.vector, floor))
    best_alloc, best_val, start_vals, traces = [], [], [], []
    for li, level in enumerate(L):
        per_start = []
        runs = []
        for si, s in enumerate(starts):
            rng = np.random.default_rng(derive_seed(seed, li * len(starts) + si))
            c, val, trace = hill_climb(flows, budget, float(level), _project(s, budget, floor),
                                       iterations, rng, floor=floor)
            per_start.append(val)
            runs.append((val, c))
            if keep_traces:
                traces.append([trace])
        start_vals.append(per_start)
        val, c = max(runs, key=lambda t: t[0])
        best_val.append(val)
        best_alloc.append(CapacityAllocation(dict(zip(ids, c.tolist())), float(budget), None, f"hill-climb@{level:.6g}"))
    candidates = [a.vector for a in best_alloc] + [homog.vector, mks.vector]
    cand_frac = np.array([fraction_within(flows, c, L) for c in candidates]).reshape(len(candidates), len(L))
    return EnvelopeResult(
        L=L,
        envelope=cand_frac.max(axis=0),
        best_fraction=np.array(best_val),
        allocations=best_alloc,
        homogeneous=cand_frac[-2],
        mu_k_sigma=cand_frac[-1],
        start_fractions=np.array(start_vals),
        traces=traces,
        meta={"seed": seed, "iterations": iterations, "budget": budget, "m": len(flows), "k": mks.k},
    )
