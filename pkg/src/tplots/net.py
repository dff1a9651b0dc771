"""Network model, oblivious routings and congestion evaluation.

A :class:`Network` is a directed capacitated graph whose nodes carry
ingress/egress rate limits.  A :class:`Routing` stores the flow fractions
``f[e, i, j]``: the share of the demand from node ``i`` to node ``j`` that
crosses edge ``e``.  Loads are evaluated as ``sum_ij D_ij f_ij(e) / c(e)``.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import networkx as nx
import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import RoutingError, StructuralError, UnsupportedModeError

CONSERVATION_TOL = 1e-9


@dataclass(frozen=True)
class Node:
    id: str
    name: str = ""
    r: float = 1.0
    q: float = 1.0


@dataclass(frozen=True)
class Edge:
    id: str
    tail: str
    head: str
    capacity: float = 1.0
    weight: float | None = None


class Network:
    """Immutable directed graph with per-edge capacity and per-node rates.

    Parameters
    ----------
    nodes : sequence of Node
    edges : sequence of Edge
        At most one edge per ordered node pair; capacities must be positive.
    """

    def __init__(self, nodes: Sequence[Node], edges: Sequence[Edge]):
        nodes = tuple(nodes)
        edges = tuple(edges)
        ids = [v.id for v in nodes]
        if len(set(ids)) != len(ids):
            raise StructuralError("duplicate node ids")
        if len(nodes) < 2:
            raise StructuralError("a network needs at least two nodes")
        index = {v: k for k, v in enumerate(ids)}
        for v in nodes:
            if v.r < 0 or v.q < 0:
                raise StructuralError(f"node {v.id!r}: negative rate")
        eids = [e.id for e in edges]
        if len(set(eids)) != len(eids):
            raise StructuralError("duplicate edge ids")
        pairs = set()
        for e in edges:
            if e.tail not in index or e.head not in index:
                raise StructuralError(f"edge {e.id!r} references an unknown node")
            if e.tail == e.head:
                raise StructuralError(f"edge {e.id!r} is a self-loop")
            if not e.capacity > 0:
                raise StructuralError(f"edge {e.id!r}: capacity must be > 0")
            if e.weight is not None and not e.weight > 0:
                raise StructuralError(f"edge {e.id!r}: metric weight must be > 0")
            if (e.tail, e.head) in pairs:
                raise StructuralError(f"parallel edge {e.tail}->{e.head} ({e.id!r})")
            pairs.add((e.tail, e.head))

        self._nodes = nodes
        self._edges = edges
        self._node_index = index
        self._edge_index = {e: k for k, e in enumerate(eids)}
        cap = np.array([e.capacity for e in edges], dtype=float)
        cap.setflags(write=False)
        self._capacities = cap
        tails = np.array([index[e.tail] for e in edges], dtype=np.intp)
        heads = np.array([index[e.head] for e in edges], dtype=np.intp)
        tails.setflags(write=False)
        heads.setflags(write=False)
        self._tails, self._heads = tails, heads

    # -- accessors -------------------------------------------------------
    @property
    def nodes(self) -> tuple[Node, ...]:
        return self._nodes

    @property
    def edges(self) -> tuple[Edge, ...]:
        return self._edges

    @property
    def n(self) -> int:
        return len(self._nodes)

    @property
    def n_edges(self) -> int:
        return len(self._edges)

    @property
    def node_ids(self) -> tuple[str, ...]:
        return tuple(v.id for v in self._nodes)

    @property
    def edge_ids(self) -> tuple[str, ...]:
        return tuple(e.id for e in self._edges)

    @property
    def capacities(self) -> np.ndarray:
        return self._capacities

    @property
    def tails(self) -> np.ndarray:
        return self._tails

    @property
    def heads(self) -> np.ndarray:
        return self._heads

    @property
    def ingress(self) -> np.ndarray:
        return np.array([v.r for v in self._nodes], dtype=float)

    @property
    def egress(self) -> np.ndarray:
        return np.array([v.q for v in self._nodes], dtype=float)

    @property
    def homogeneous(self) -> bool:
        return all(v.r == 1 and v.q == 1 for v in self._nodes)

    def node_index(self, node_id: str) -> int:
        try:
            return self._node_index[node_id]
        except KeyError:
            raise StructuralError(f"unknown node {node_id!r}") from None

    def edge_index(self, edge_id: str | int) -> int:
        if isinstance(edge_id, (int, np.integer)) and not isinstance(edge_id, bool):
            if not 0 <= edge_id < self.n_edges:
                raise StructuralError(f"edge index {edge_id} out of range")
            return int(edge_id)
        try:
            return self._edge_index[edge_id]
        except KeyError:
            raise StructuralError(f"unknown edge {edge_id!r}") from None

    def edge(self, edge_id: str | int) -> Edge:
        return self._edges[self.edge_index(edge_id)]

    def find_edge(self, tail: str, head: str) -> Edge | None:
        for e in self._edges:
            if e.tail == tail and e.head == head:
                return e
        return None

    def with_capacities(self, capacities: Mapping[str, float] | Sequence[float]) -> "Network":
        """Copy of the network with replaced edge capacities."""
        if isinstance(capacities, Mapping):
            cap = [capacities.get(e.id, e.capacity) for e in self._edges]
        else:
            cap = list(capacities)
            if len(cap) != self.n_edges:
                raise StructuralError("capacity vector length does not match edge count")
        edges = [
            Edge(e.id, e.tail, e.head, float(c), e.weight) for e, c in zip(self._edges, cap)
        ]
        return Network(self._nodes, edges)

    def with_rates(self, r: Sequence[float], q: Sequence[float]) -> "Network":
        nodes = [Node(v.id, v.name, float(a), float(b)) for v, a, b in zip(self._nodes, r, q)]
        return Network(nodes, self._edges)

    def to_networkx(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.node_ids)
        for e in self._edges:
            g.add_edge(e.tail, e.head, id=e.id, capacity=e.capacity, weight=e.weight)
        return g

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": v.id, "name": v.name, "r": v.r, "q": v.q} for v in self._nodes],
            "edges": [
                {"id": e.id, "from": e.tail, "to": e.head, "capacity": e.capacity, "weight": e.weight}
                for e in self._edges
            ],
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Network":
        try:
            nodes = [
                Node(str(v["id"]), str(v.get("name", "")), float(v.get("r", 1.0)), float(v.get("q", 1.0)))
                for v in doc["nodes"]
            ]
            edges = [
                Edge(
                    str(e["id"]),
                    str(e["from"]),
                    str(e["to"]),
                    float(e.get("capacity", 1.0)),
                    None if e.get("weight") is None else float(e["weight"]),
                )
                for e in doc["edges"]
            ]
        except (KeyError, TypeError) as exc:
            raise StructuralError(f"malformed network document: {exc}") from exc
        return cls(nodes, edges)

    @classmethod
    def from_json(cls, path: str | Path) -> "Network":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_json(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def __repr__(self) -> str:
        return f"Network(n={self.n}, edges={self.n_edges}, homogeneous={self.homogeneous})"


class Routing:
    """Oblivious routing as a dense ``(|E|, n, n)`` array of flow fractions.

    ``fractions[e, i, j]`` is ``f_ij(e)``.  The array is read-only.
    """

    def __init__(self, node_ids: Sequence[str], edge_ids: Sequence[str], fractions: np.ndarray):
        fractions = np.array(fractions, dtype=float)
        n, m = len(node_ids), len(edge_ids)
        if fractions.shape != (m, n, n):
            raise StructuralError(f"fractions must have shape {(m, n, n)}, got {fractions.shape}")
        fractions.setflags(write=False)
        self._node_ids = tuple(node_ids)
        self._edge_ids = tuple(edge_ids)
        self._f = fractions

    @property
    def n(self) -> int:
        return len(self._node_ids)

    @property
    def node_ids(self) -> tuple[str, ...]:
        return self._node_ids

    @property
    def edge_ids(self) -> tuple[str, ...]:
        return self._edge_ids

    @property
    def fractions(self) -> np.ndarray:
        return self._f

    @property
    def single_path(self) -> bool:
        nz = self._f[self._f != 0]
        return bool(np.all(nz == 1.0))

    def edge_matrix(self, e: int) -> np.ndarray:
        return self._f[e]

    def flow_matrix(self) -> np.ndarray:
        """Fractions reshaped to ``(|E|, n*n)`` for batched load evaluation."""
        return self._f.reshape(len(self._edge_ids), -1)

    @classmethod
    def from_records(cls, net: Network, records: Iterable) -> "Routing":
        """Build from ``(src, dst, edge, fraction)`` tuples or dicts with those keys."""
        f = np.zeros((net.n_edges, net.n, net.n))
        for rec in records:
            if isinstance(rec, Mapping):
                src, dst, edge, frac = rec["src"], rec["dst"], rec["edge"], rec["fraction"]
            else:
                src, dst, edge, frac = rec
            f[net.edge_index(edge), net.node_index(str(src)), net.node_index(str(dst))] = float(frac)
        return cls(net.node_ids, net.edge_ids, f)

    def to_records(self) -> list[dict]:
        out = []
        for e, i, j in zip(*np.nonzero(self._f)):
            out.append(
                {
                    "src": self._node_ids[i],
                    "dst": self._node_ids[j],
                    "edge": self._edge_ids[e],
                    "fraction": float(self._f[e, i, j]),
                }
            )
        return out

    @classmethod
    def from_json(cls, net: Network, path: str | Path) -> "Routing":
        with open(path) as fh:
            return cls.from_records(net, json.load(fh))

    def to_json(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_records(), fh, indent=1)

    def __repr__(self) -> str:
        return f"Routing(n={self.n}, edges={len(self._edge_ids)}, single_path={self.single_path})"


@dataclass(frozen=True)
class Violation:
    commodity: tuple[str, str]
    node: str | None
    residual: float
    kind: str = "conservation"


def _check_dims(net: Network, f: Routing) -> None:
    if f.node_ids != net.node_ids or f.edge_ids != net.edge_ids:
        raise StructuralError(
            f"routing dimensions (n={f.n}, |E|={len(f.edge_ids)}) do not match "
            f"network (n={net.n}, |E|={net.n_edges}) or ids differ"
        )


def validate_routing(net: Network, f: Routing, tol: float = CONSERVATION_TOL) -> list[Violation]:
    """List every flow-conservation or bounds violation of ``f`` on ``net``.

    For a commodity ``(i, j)`` with ``i != j`` the net out-flow must be 1 at
    ``i``, -1 at ``j`` and 0 elsewhere.  Diagonal commodities must be
    circulations (net flow 0 everywhere).  The residual is expected minus
    observed net out-flow.
    """
    _check_dims(net, f)
    n = net.n
    F = f.fractions
    ids = net.node_ids
    report: list[Violation] = []

    bad = np.argwhere((F < -tol) | (F > 1 + tol))
    for e, i, j in bad:
        report.append(Violation((ids[i], ids[j]), None, float(F[e, i, j]), kind="bounds"))

    # incidence: out-flow minus in-flow per node, per commodity
    inc = np.zeros((n, net.n_edges))
    inc[net.tails, np.arange(net.n_edges)] += 1.0
    inc[net.heads, np.arange(net.n_edges)] -= 1.0
    net_out = np.einsum("ve,eij->ijv", inc, F)
    expected = np.zeros((n, n, n))
    for i in range(n):
        expected[i, :, i] += 1.0
        expected[:, i, i] -= 1.0
    # diagonal commodities: the two updates above cancel, leaving a circulation
    residual = expected - net_out
    for i, j, v in np.argwhere(np.abs(residual) > tol):
        report.append(Violation((ids[i], ids[j]), ids[v], float(residual[i, j, v])))
    return report


def _adjacency(net: Network, weights: np.ndarray, excluded: frozenset[int]):
    out: list[list[tuple[int, float, int]]] = [[] for _ in range(net.n)]
    rev: list[list[tuple[int, float, int]]] = [[] for _ in range(net.n)]
    for k in range(net.n_edges):
        if k in excluded:
            continue
        u, v = int(net.tails[k]), int(net.heads[k])
        out[u].append((v, float(weights[k]), k))
        rev[v].append((u, float(weights[k]), k))
    return out, rev


def _dijkstra(adj, source: int, n: int) -> np.ndarray:
    dist = np.full(n, np.inf)
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, w, _ in adj[u]:
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-12)


class _PathFinder:
    """Shortest paths with lexicographic tie-break on node-id sequences."""

    def __init__(self, net: Network, weights: np.ndarray, excluded: Iterable[int] = ()):
        self.net = net
        self.out, self.rev = _adjacency(net, weights, frozenset(excluded))
        self._from: dict[int, np.ndarray] = {}
        self._to: dict[int, np.ndarray] = {}
        ids = net.node_ids
        for adj in self.out:
            adj.sort(key=lambda t: ids[t[0]])

    def dist_from(self, s: int) -> np.ndarray:
        if s not in self._from:
            self._from[s] = _dijkstra(self.out, s, self.net.n)
        return self._from[s]

    def dist_to(self, t: int) -> np.ndarray:
        if t not in self._to:
            self._to[t] = _dijkstra(self.rev, t, self.net.n)
        return self._to[t]

    def path(self, s: int, t: int) -> list[int] | None:
        """Edge indices of the chosen s->t path, or None when unreachable."""
        if s == t:
            return []
        ds, dt = self.dist_from(s), self.dist_to(t)
        total = ds[t]
        if not np.isfinite(total):
            return None
        u, edges = s, []
        while u != t:
            for v, w, k in self.out[u]:  # sorted by node id
                if _close(ds[u] + w + dt[v], total) and _close(ds[u] + w, ds[v]):
                    edges.append(k)
                    u = v
                    break
            else:  # pragma: no cover - guarded by finite distance
                raise RoutingError("shortest path reconstruction failed")
        return edges


def shortest_path_routing(net: Network) -> Routing:
    """Single-path routing along minimum-metric paths.

    Ties between equal-weight paths go to the lexicographically smallest
    node-id sequence.  Self-demands are not routed.
    """
    missing = [e.id for e in net.edges if e.weight is None]
    if missing:
        raise RoutingError(f"edges without metric weight: {', '.join(missing)}")
    weights = np.array([e.weight for e in net.edges], dtype=float)
    finder = _PathFinder(net, weights)
    f = np.zeros((net.n_edges, net.n, net.n))
    ids = net.node_ids
    for s in range(net.n):
        for t in range(net.n):
            if s == t:
                continue
            p = finder.path(s, t)
            if p is None:
                raise RoutingError(f"no path from {ids[s]!r} to {ids[t]!r}")
            f[p, s, t] = 1.0
    return Routing(net.node_ids, net.edge_ids, f)


def _as_matrices(net: Network, D) -> tuple[np.ndarray, bool]:
    D = np.asarray(D, dtype=float)
    single = D.ndim == 2
    if single:
        D = D[None]
    if D.ndim != 3 or D.shape[1:] != (net.n, net.n):
        raise StructuralError(f"traffic matrices must be {net.n}x{net.n}, got shape {D.shape[-2:]}")
    return D, single


def edge_loads(net: Network, f: Routing, D) -> np.ndarray:
    """Congestion on every edge: ``(|E|,)`` for one matrix, ``(m, |E|)`` for a stack."""
    _check_dims(net, f)
    D, single = _as_matrices(net, D)
    flows = D.reshape(D.shape[0], -1) @ f.flow_matrix().T
    loads = flows / net.capacities
    return loads[0] if single else loads


def edge_congestion(net: Network, f: Routing, e: str | int, D) -> float | np.ndarray:
    """``sum_ij D_ij f_ij(e) / c(e)`` for one edge."""
    _check_dims(net, f)
    k = net.edge_index(e)
    D, single = _as_matrices(net, D)
    flow = np.tensordot(D, f.fractions[k], axes=([1, 2], [0, 1]))
    load = flow / net.capacities[k]
    return float(load[0]) if single else load


def global_congestion(net: Network, f: Routing, D) -> float | np.ndarray:
    loads = edge_loads(net, f, D)
    gc = loads.max(axis=-1)
    return float(gc) if np.ndim(gc) == 0 else gc


def throughput_from_gc(gc):
    """``min(1/GC, 1)``; zero congestion maps to 1."""
    gc = np.asarray(gc, dtype=float)
    with np.errstate(divide="ignore"):
        tp = np.where(gc > 0, np.minimum(1.0 / np.where(gc > 0, gc, 1.0), 1.0), 1.0)
    return float(tp) if tp.ndim == 0 else tp


def throughput(net: Network, f: Routing, D) -> float | np.ndarray:
    return throughput_from_gc(global_congestion(net, f, D))


@dataclass(frozen=True)
class EdgeClasses:
    bridges: frozenset[str]
    strictly_minimal: str | None


def classify_edges(net: Network) -> EdgeClasses:
    """Bridges of the underlying undirected graph and the strictly minimal edge."""
    g = nx.Graph()
    g.add_nodes_from(net.node_ids)
    g.add_edges_from((e.tail, e.head) for e in net.edges)
    bridge_pairs = {frozenset(p) for p in nx.bridges(g)}
    bridges = frozenset(e.id for e in net.edges if frozenset((e.tail, e.head)) in bridge_pairs)
    cap = net.capacities
    strictly_minimal = None
    if cap.size:
        lo = cap.min()
        at_min = np.flatnonzero(cap == lo)
        if at_min.size == 1:
            strictly_minimal = net.edges[int(at_min[0])].id
    return EdgeClasses(bridges, strictly_minimal)


def max_permutation_weight(weights: np.ndarray) -> tuple[float, np.ndarray]:
    """Maximum of ``sum_i W[i, sigma(i)]`` over permutations and a witness sigma."""
    weights = np.asarray(weights, dtype=float)
    rows, cols = linear_sum_assignment(weights, maximize=True)
    sigma = np.empty(weights.shape[0], dtype=np.intp)
    sigma[rows] = cols
    return float(weights[rows, cols].sum()), sigma


def worst_case_edge_congestion(net: Network, f: Routing, e: str | int) -> float:
    """Worst congestion on ``e`` over all admissible matrices (attained on a permutation)."""
    if not net.homogeneous:
        raise UnsupportedModeError("worst-case edge congestion is only defined for homogeneous networks")
    _check_dims(net, f)
    k = net.edge_index(e)
    value, _ = max_permutation_weight(f.fractions[k])
    return value / net.capacities[k]
