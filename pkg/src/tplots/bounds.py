"""Distribution-free guarantees and bounds on the global congestion CDF."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .exceptions import StructuralError
from .net import Network, Routing
from .stats import DummyEdge, GaussianParams, TPlot, target_flows


def chebyshev_saturation_bound(params: GaussianParams, c: float) -> float:
    """One-sided Chebyshev bound on ``Pr{load >= c}``: ``1 / (1 + ((c - mu) / sigma)^2)``."""
    mu, sigma = params.mu, params.sigma
    if c <= mu:
        return 1.0
    if sigma == 0:
        return 0.0
    k = (c - mu) / sigma
    return 1.0 / (1.0 + k * k)


def capacity_for_guarantee(params: GaussianParams, G: float) -> float:
    """Capacity ``mu + sigma * sqrt(G / (1 - G))`` that keeps saturation below ``1 - G``."""
    if not 0.0 <= G < 1.0:
        raise StructuralError("guarantee level must satisfy 0 <= G < 1 (G = 1 needs infinite capacity)")
    return params.mu + params.sigma * math.sqrt(G / (1.0 - G))


def dummy_edge(net: Network, f: Routing, e1, e2) -> DummyEdge:
    """Synthetic edge whose load is ``EC(e1) + EC(e2)``.

    Its flow pattern is ``f(e1)/c(e1) + f(e2)/c(e2)`` with capacity 1, which
    equals ``f(e1) + f(e2)`` on unit-capacity networks.
    """
    f1, c1 = target_flows(net, f, e1)
    f2, c2 = target_flows(net, f, e2)
    id1, id2 = net.edge(e1).id, net.edge(e2).id
    if id1 == id2:
        raise StructuralError("the dummy edge needs two distinct edges")
    flows = f1 / c1 + f2 / c2
    flows.setflags(write=False)
    return DummyEdge(f"{id1}+{id2}", flows, 1.0, (id1, id2))


def most_loaded_pair(net: Network, params: Mapping[str, GaussianParams]) -> tuple[str, str]:
    """The two edges with the highest mean load (ties by edge order)."""
    ids = [e.id for e in net.edges]
    order = sorted(range(len(ids)), key=lambda k: (-params[ids[k]].mu, k))
    return ids[order[0]], ids[order[1]]


@dataclass(frozen=True)
class GlobalCDFBounds:
    """Approximation and bounds at threshold ``L``.

    ``upper_bound`` bounds ``Pr{GC <= L}`` from above; ``lower_bound``
    bounds the tail ``Pr{GC > L}`` from below (``lower_raw`` is the value
    before clamping to [0, 1]).
    """

    L: float
    independence_approx: float
    upper_bound: float
    lower_bound: float
    lower_raw: float
    meta: dict = field(default_factory=dict)


def global_cdf_bounds(edge_tplots: Mapping[str, TPlot], dummy_tplot: TPlot | None, L: float,
                      pair: tuple[str, str] | None = None) -> GlobalCDFBounds:
    """Independence approximation, upper bound and tail lower bound for ``Pr{GC <= L}``.

    The dummy plot must describe ``EC(e1) + EC(e2)`` for the pair named in
    its metadata (or given as ``pair``); those two edges must be present in
    ``edge_tplots``.  Without a dummy plot (e.g. a one-edge network) only the
    single-edge bounds are used and the tail bound is ``max_e Pr{EC(e) > L}``.
    """
    if L < 0:
        raise StructuralError("threshold L must be >= 0")
    if not edge_tplots:
        raise StructuralError("at least one edge T-Plot is required")
    cdfs = np.array([tp.cdf_at(L) for tp in edge_tplots.values()])
    approx = float(np.prod(cdfs))
    single = float(cdfs.min())
    if dummy_tplot is None:
        raw = 1.0 - single
        upper = min(single, 1.0 - raw)
        meta = {"min_edge_cdf": single, "dummy_cdf_2L": None, "pair": None}
        return GlobalCDFBounds(float(L), approx, upper, min(max(raw, 0.0), 1.0), float(raw), meta)
    pair = pair or tuple(dummy_tplot.meta.get("parts", ())) or tuple(dummy_tplot.target.split("+"))
    if len(pair) != 2 or any(p not in edge_tplots for p in pair):
        raise StructuralError(f"dummy pair {pair} not found among the edge T-Plots")
    dummy_cdf = float(dummy_tplot.cdf_at(2.0 * L))
    tail1 = 1.0 - float(edge_tplots[pair[0]].cdf_at(L))
    tail2 = 1.0 - float(edge_tplots[pair[1]].cdf_at(L))
    raw = tail1 + tail2 - (1.0 - dummy_cdf)
    lower = min(max(raw, 0.0), 1.0)
    upper = min(single, dummy_cdf, 1.0 - lower)
    meta = {"min_edge_cdf": single, "dummy_cdf_2L": dummy_cdf, "pair": list(pair)}
    return GlobalCDFBounds(float(L), approx, upper, lower, float(raw), meta)


def bounds_table(edge_tplots: Mapping[str, TPlot], dummy_tplot: TPlot | None, grid,
                 global_tplot: TPlot | None = None) -> np.ndarray:
    """Rows ``(L, approx, upper, lower, empirical)``; ``empirical`` is NaN without a global plot."""
    rows = []
    for L in np.asarray(grid, dtype=float):
        b = global_cdf_bounds(edge_tplots, dummy_tplot, L)
        emp = global_tplot.cdf_at(L) if global_tplot is not None else float("nan")
        rows.append((L, b.independence_approx, b.upper_bound, b.lower_bound, emp))
    return np.array(rows)
