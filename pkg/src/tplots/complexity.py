"""Permanents of 0-1 matrices encoded as permutation T-Plot atoms.

Given a non-bridge edge ``e`` and a 0-1 matrix ``A``, :func:`reduction_routing`
builds a routing in which commodity ``(s, d)`` crosses ``e`` exactly when
``A[s, d] = 1``.  A permutation then loads ``e`` with ``n / c(e)`` exactly
when it selects only ones of ``A``, so ``n!`` times the atom mass at
``n / c(e)`` equals the permanent of ``A``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .exceptions import EnumerationLimitError, RoutingError, StructuralError
from .net import Edge, Network, Node, Routing, _PathFinder, classify_edges, validate_routing
from .stats import exact_tplot_permutations

BRUTE_FORCE_LIMIT = 10
VERIFY_LIMIT = 8


def _zero_one(A) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise StructuralError("a square matrix is required")
    if not np.all((A == 0) | (A == 1)):
        raise StructuralError("matrix entries must be 0 or 1")
    return A.astype(np.int64)


def permanent_bruteforce(A) -> int:
    """Permanent by summing over all permutations (n <= 10)."""
    A = _zero_one(A)
    n = len(A)
    if n > BRUTE_FORCE_LIMIT:
        raise EnumerationLimitError(f"brute-force permanent refuses n = {n} > {BRUTE_FORCE_LIMIT}")
    rows = np.arange(n)
    return sum(int(np.all(A[rows, list(p)])) for p in itertools.permutations(range(n)))


def permanent_ryser(A) -> int:
    """Ryser's inclusion-exclusion formula over column subsets, in exact integers."""
    A = _zero_one(A)
    n = len(A)
    if n == 0:
        return 1
    total = 0
    for mask in range(1, 1 << n):
        cols = [j for j in range(n) if mask >> j & 1]
        prod = 1
        for i in range(n):
            s = int(A[i, cols].sum())
            if s == 0:
                prod = 0
                break
            prod *= s
        total += (-1) ** len(cols) * prod
    return (-1) ** n * total


def permanent(A) -> int:
    """Permanent of a 0-1 matrix; Ryser's formula above n = 7, enumeration below."""
    A = _zero_one(A)
    if len(A) > BRUTE_FORCE_LIMIT:
        raise EnumerationLimitError(f"permanent refuses n = {len(A)} > {BRUTE_FORCE_LIMIT}")
    return permanent_ryser(A) if len(A) > 7 else permanent_bruteforce(A)


def complete_network(n: int, capacities=None, prefix: str = "v") -> Network:
    """Complete digraph on ``n`` nodes with unit weights; edges ``e0, e1, ...`` in row order."""
    nodes = [Node(f"{prefix}{i}") for i in range(n)]
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    caps = np.ones(len(pairs)) if capacities is None else np.asarray(capacities, dtype=float)
    edges = [Edge(f"e{k}", f"{prefix}{i}", f"{prefix}{j}", float(caps[k]), 1.0) for k, (i, j) in enumerate(pairs)]
    return Network(nodes, edges)


def reduction_routing(net: Network, e, A) -> Routing:
    """Routing with ``f_sd(e) = A[s, d]`` for every commodity, including ``s = d``.

    Commodities with ``A[s, d] = 0`` follow a unit-weight shortest path in
    the network without ``e``.  The others go ``s -> tail(e)``, cross ``e``,
    then ``head(e) -> d``; both legs avoid ``e`` and the second leg also
    avoids the first leg's edges so that no fraction exceeds 1.  For
    ``s = d`` this is a circulation through ``e``.
    """
    A = _zero_one(A)
    n = net.n
    if A.shape != (n, n):
        raise StructuralError(f"matrix is {A.shape[0]}x{A.shape[1]} but the network has {n} nodes")
    k = net.edge_index(e)
    edge = net.edges[k]
    if edge.id in classify_edges(net).bridges:
        raise RoutingError(f"edge {edge.id!r} is a bridge; the reduction needs a non-bridge edge")
    unit = np.ones(net.n_edges)
    avoid_e = _PathFinder(net, unit, excluded=[k])
    tail, head = net.node_index(edge.tail), net.node_index(edge.head)
    ids = net.node_ids
    f = np.zeros((net.n_edges, n, n))
    for s in range(n):
        for d in range(n):
            if A[s, d] == 0:
                if s == d:
                    continue
                p = avoid_e.path(s, d)
                if p is None:
                    raise RoutingError(f"no path from {ids[s]!r} to {ids[d]!r} avoiding {edge.id!r}")
                f[p, s, d] = 1.0
                continue
            path = _through(net, unit, avoid_e, k, s, tail, head, d)
            if path is None:
                raise RoutingError(
                    f"no edge-disjoint route {ids[s]!r} -> {edge.id!r} -> {ids[d]!r}"
                )
            f[path, s, d] = 1.0
    return Routing(net.node_ids, net.edge_ids, f)


def _through(net, unit, avoid_e, k, s, tail, head, d):
    first = avoid_e.path(s, tail)
    if first is not None:
        second = _PathFinder(net, unit, excluded=[k, *first]).path(head, d)
        if second is not None:
            return first + [k] + second
    second = avoid_e.path(head, d)
    if second is not None:
        first = _PathFinder(net, unit, excluded=[k, *second]).path(s, tail)
        if first is not None:
            return first + [k] + second
    return None


@dataclass(frozen=True)
class ReductionCheck:
    permanent: int
    scaled_mass: int  # n! times the atom mass at L = n / c(e)
    L: float
    equal: bool


def verify_reduction(net: Network, e, A) -> ReductionCheck:
    """Compare ``Perm(A)`` with ``n!`` times the exact T-Plot mass at ``n / c(e)``."""
    A = _zero_one(A)
    n = net.n
    if n > VERIFY_LIMIT:
        raise EnumerationLimitError(f"verification enumerates n! permutations; n = {n} > {VERIFY_LIMIT}")
    f = reduction_routing(net, e, A)
    if validate_routing(net, f):  # pragma: no cover - guaranteed by construction
        raise RoutingError("reduction routing violates flow conservation")
    cap = net.edge(e).capacity
    L = n / cap
    tp = exact_tplot_permutations(net, f, e, limit=VERIFY_LIMIT)
    scaled = tp.count_at(L)
    perm = permanent(A)
    return ReductionCheck(perm, scaled, L, perm == scaled)
