"""T-Plots: sampled and exact load distributions, Gaussian parameters, summaries.

A :class:`TPlot` is either a fixed-range histogram (sampled plots) or a set
of atoms with integer multiplicities (exact enumeration, or transformed
plots such as throughput CCDFs).  Counts are integers in both cases, so
histograms built from disjoint parts of one sample stream merge exactly.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linprog

from . import _kernels
from .exceptions import EnumerationLimitError, StructuralError, UnsupportedModeError
from .moments import class_sums, find_table, MomentTable, permutation_weights
from .net import Network, Routing, _check_dims, max_permutation_weight, throughput_from_gc
from .tset import Sampler, SamplerConfig, TSetSpec, derive_seed

DEFAULT_BINS = 100
EXACT_LIMIT = 8
LONG_RUN_LIMIT = 11
ATOM_DECIMALS = 9
GLOBAL = "global"
THROUGHPUT = "throughput"


@dataclass(frozen=True)
class DummyEdge:
    """A synthetic edge with its own flow pattern, e.g. the sum of two edges' loads."""

    id: str
    flows: np.ndarray
    capacity: float = 1.0
    parts: tuple[str, ...] = ()


# -- target resolution ----------------------------------------------------

@dataclass(frozen=True)
class _Target:
    label: str
    kind: str  # "edge" | "global" | "throughput"
    F: np.ndarray  # (k, n, n)
    caps: np.ndarray  # (k,)


def _resolve(net: Network, f: Routing, target) -> _Target:
    _check_dims(net, f)
    if isinstance(target, DummyEdge):
        flows = np.asarray(target.flows, dtype=float)
        if flows.shape != (net.n, net.n):
            raise StructuralError("dummy edge flow pattern does not match the network size")
        return _Target(target.id, "edge", flows[None], np.array([float(target.capacity)]))
    if target in (GLOBAL, THROUGHPUT):
        return _Target(target, target, np.asarray(f.fractions), net.capacities)
    k = net.edge_index(target)
    return _Target(net.edges[k].id, "edge", f.fractions[k][None], net.capacities[k : k + 1])


def target_flows(net: Network, f: Routing, e) -> tuple[np.ndarray, float]:
    """Flow pattern ``(n, n)`` and capacity of an edge id, index or :class:`DummyEdge`."""
    t = _resolve(net, f, e)
    if t.kind != "edge":
        raise StructuralError("a single edge (or dummy edge) is required")
    return t.F[0], float(t.caps[0])


def worst_case_load(flows: np.ndarray, capacity: float, tset: TSetSpec) -> float:
    """Largest load of one flow pattern over ``tset``.

    The load is linear in the matrix, so the maximum sits on a vertex: a
    permutation (derangement for zero-diagonal kinds) for ``P``, ``S``,
    ``A`` and ``P_d``, ``S_d``.  ``A_d`` and the heterogeneous kinds are
    solved as transportation linear programs.
    """
    flows = np.asarray(flows, dtype=float)
    n = tset.n
    if tset.kind in ("P", "S", "A"):
        return max_permutation_weight(flows)[0] / capacity
    if tset.kind in ("P_d", "S_d"):
        W = flows.copy()
        np.fill_diagonal(W, -(np.abs(flows).sum() + 1.0) * n)
        return max_permutation_weight(W)[0] / capacity
    rows = np.kron(np.eye(n), np.ones((1, n)))
    cols = np.kron(np.ones((1, n)), np.eye(n))
    A = np.vstack([rows, cols])
    b = np.concatenate([tset.row_caps(), tset.col_caps()])
    bounds = [(0.0, 0.0) if (tset.zero_diagonal and i == j) else (0.0, None) for i in range(n) for j in range(n)]
    if tset.surface:
        res = linprog(-flows.ravel(), A_eq=A, b_eq=b, bounds=bounds, method="highs")
    else:
        res = linprog(-flows.ravel(), A_ub=A, b_ub=b, bounds=bounds, method="highs")
    if not res.success:  # pragma: no cover - feasible by construction
        raise StructuralError(f"worst-case linear program failed: {res.message}")
    return float(-res.fun) / capacity


def _worst(t: _Target, tset: TSetSpec) -> float:
    return max(worst_case_load(t.F[k], t.caps[k], tset) for k in range(len(t.caps)))


# -- TPlot ----------------------------------------------------------------

@dataclass
class TPlot:
    """Distribution of a congestion statistic over a T-Set.

    Exactly one of ``edges`` (histogram bin edges, ``len(counts) + 1``) and
    ``atoms`` (support points, ``len(counts)``) is set.
    """

    target: str
    tset: TSetSpec
    counts: np.ndarray
    edges: np.ndarray | None = None
    atoms: np.ndarray | None = None
    exact: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if (self.edges is None) == (self.atoms is None):
            raise StructuralError("a TPlot has either bin edges or atoms")
        if self.edges is not None:
            self.edges = np.asarray(self.edges, dtype=float)
            if len(self.edges) != len(self.counts) + 1 or np.any(np.diff(self.edges) <= 0):
                raise StructuralError("bin edges must be strictly increasing, one more than counts")
        else:
            self.atoms = np.asarray(self.atoms, dtype=float)
            if len(self.atoms) != len(self.counts) or np.any(np.diff(self.atoms) <= 0):
                raise StructuralError("atoms must be strictly increasing, one per count")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def binned(self) -> bool:
        return self.edges is not None

    @property
    def lower(self) -> np.ndarray:
        return self.edges[:-1] if self.binned else self.atoms

    @property
    def upper(self) -> np.ndarray:
        return self.edges[1:] if self.binned else self.atoms

    @property
    def support(self) -> np.ndarray:
        """Bin midpoints, or atom locations."""
        return 0.5 * (self.edges[:-1] + self.edges[1:]) if self.binned else self.atoms

    def pdf(self) -> np.ndarray:
        """Probability mass per bin or atom."""
        return self.counts / self.total

    def cdf(self) -> np.ndarray:
        """Cumulative mass at each bin's upper edge (or at each atom)."""
        c = np.cumsum(self.counts) / self.total
        c[-1] = 1.0
        return c

    def cdf_at(self, x) -> np.ndarray | float:
        """``Pr{X <= x}``; linear within a bin for histograms, a step function for atoms."""
        x = np.asarray(x, dtype=float)
        if self.binned:
            knots = np.concatenate([[0.0], self.cdf()])
            out = np.interp(x, self.edges, knots, left=0.0, right=1.0)
        else:
            tol = 10.0 ** -ATOM_DECIMALS
            idx = np.searchsorted(self.atoms, x + tol, side="right")
            cum = np.concatenate([[0.0], self.cdf()])
            out = cum[idx]
        return float(out) if out.ndim == 0 else out

    def tail_at(self, x, inclusive: bool = True) -> np.ndarray | float:
        """Upper tail mass ``Pr{X >= x}`` (``Pr{X > x}`` if not inclusive).

        Histograms count every bin whose upper edge reaches ``x``, which can
        only overstate the tail.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        tol = 10.0 ** -ATOM_DECIMALS
        mass = self.pdf()
        if self.binned:
            hit = self.upper[None, :] >= x[:, None] if inclusive else self.upper[None, :] > x[:, None]
        else:
            hit = (self.atoms[None, :] >= x[:, None] - tol) if inclusive else (self.atoms[None, :] > x[:, None] + tol)
        out = (hit * mass).sum(axis=1)
        return float(out[0]) if out.size == 1 else out

    def mass_at(self, value: float) -> float:
        """Mass of the atom at ``value`` (0 if absent)."""
        if self.binned:
            raise UnsupportedModeError("atom masses need an atom-valued plot")
        hit = np.abs(self.atoms - value) <= 10.0 ** -ATOM_DECIMALS * max(1.0, abs(value))
        return float(self.counts[hit].sum() / self.total)

    def count_at(self, value: float) -> int:
        if self.binned:
            raise UnsupportedModeError("atom counts need an atom-valued plot")
        hit = np.abs(self.atoms - value) <= 10.0 ** -ATOM_DECIMALS * max(1.0, abs(value))
        return int(self.counts[hit].sum())

    def merge(self, other: "TPlot") -> "TPlot":
        """Combine two plots of the same statistic (histograms need identical bins)."""
        if self.target != other.target or self.tset != other.tset:
            raise StructuralError("can only merge plots of the same target and T-Set")
        meta = _merge_meta(self.meta, other.meta)
        if self.binned and other.binned:
            if not np.array_equal(self.edges, other.edges):
                raise StructuralError("histograms with different bins cannot be merged")
            return TPlot(self.target, self.tset, self.counts + other.counts, edges=self.edges, meta=meta)
        if self.binned or other.binned:
            raise StructuralError("cannot merge a histogram with an atom plot")
        atoms, counts = _group_atoms(
            np.concatenate([self.atoms, other.atoms]),
            np.concatenate([self.counts, other.counts]),
        )
        return TPlot(self.target, self.tset, counts, atoms=atoms, exact=False, meta=meta)

    # -- serialization --

    def _header(self) -> dict:
        return {
            "target": self.target,
            "tset": {"kind": self.tset.kind, "n": self.tset.n, "r": self.tset.r, "q": self.tset.q},
            "total": self.total,
            "exact": self.exact,
            "form": "bins" if self.binned else "atoms",
            "meta": self.meta,
        }

    def to_dict(self) -> dict:
        doc = self._header()
        if self.binned:
            doc["bins"] = [[float(a), float(b), int(c)] for a, b, c in zip(self.edges[:-1], self.edges[1:], self.counts)]
        else:
            doc["atoms"] = [[float(a), int(c)] for a, c in zip(self.atoms, self.counts)]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "TPlot":
        ts = doc["tset"]
        tset = TSetSpec(ts["kind"], int(ts["n"]), ts.get("r"), ts.get("q"))
        if "bins" in doc:
            bins = np.array(doc["bins"], dtype=float).reshape(-1, 3)
            edges = np.append(bins[:, 0], bins[-1, 1])
            return cls(doc["target"], tset, bins[:, 2].astype(np.int64), edges=edges,
                       exact=doc.get("exact", False), meta=doc.get("meta", {}))
        atoms = np.array(doc["atoms"], dtype=float).reshape(-1, 2)
        return cls(doc["target"], tset, atoms[:, 1].astype(np.int64), atoms=atoms[:, 0],
                   exact=doc.get("exact", False), meta=doc.get("meta", {}))

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, path: str | Path) -> "TPlot":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_csv(self, path: str | Path | None = None, header_lines: tuple[str, ...] = ()) -> str:
        """CSV with columns ``bin_lower, bin_upper, count, pdf, cdf``; atoms have equal bounds.

        The first comment line carries the JSON metadata so the CSV reads
        back into an identical plot.
        """
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        buf.write("# tplot " + json.dumps(self._header()) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_lower", "bin_upper", "count", "pdf", "cdf"])
        for lo, hi, c, p, cd in zip(self.lower, self.upper, self.counts, self.pdf(), self.cdf()):
            w.writerow([repr(float(lo)), repr(float(hi)), int(c), repr(float(p)), repr(float(cd))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source: str | Path) -> "TPlot":
        text = Path(source).read_text() if not str(source).lstrip().startswith("#") else str(source)
        header = None
        rows = []
        for line in text.splitlines():
            if line.startswith("# tplot "):
                header = json.loads(line[len("# tplot "):])
            elif line.startswith("#") or line.startswith("bin_lower") or not line.strip():
                continue
            else:
                rows.append(line.split(","))
        if header is None:
            raise StructuralError("CSV lacks the '# tplot' metadata line")
        arr = np.array([[float(r[0]), float(r[1]), float(r[2])] for r in rows])
        doc = dict(header)
        if header["form"] == "bins":
            doc["bins"] = arr.tolist()
        else:
            doc["atoms"] = arr[:, [0, 2]].tolist()
        return cls.from_dict(doc)


def _merge_meta(a: dict, b: dict) -> dict:
    out = {k: v for k, v in a.items() if b.get(k) == v}
    for key, fn in (("min", min), ("max", max)):
        if key in a and key in b:
            out[key] = fn(a[key], b[key])
    if "sum" in a and "sum" in b:
        out["sum"] = a["sum"] + b["sum"]
        out["sumsq"] = a["sumsq"] + b["sumsq"]
    return out


def _group_atoms(values: np.ndarray, counts: np.ndarray | None = None,
                 sums: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Merge values that agree to ``ATOM_DECIMALS`` places; each atom sits at its group's mean."""
    values = np.asarray(values, dtype=float)
    counts = np.ones(len(values), dtype=np.int64) if counts is None else np.asarray(counts, dtype=np.int64)
    sums = values * counts if sums is None else sums
    keys = np.round(values, ATOM_DECIMALS)
    uniq, inv = np.unique(keys, return_inverse=True)
    c = np.bincount(inv, weights=counts, minlength=len(uniq)).astype(np.int64)
    s = np.bincount(inv, weights=sums, minlength=len(uniq))
    keep = c > 0
    return s[keep] / c[keep], c[keep]


def atom_plot(values, target: str, tset: TSetSpec, exact: bool = False, meta: dict | None = None) -> TPlot:
    atoms, counts = _group_atoms(values)
    return TPlot(target, tset, counts, atoms=atoms, exact=exact, meta=meta or {})


# -- sampling ---------------------------------------------------------------

def _reduce(t: _Target, loads: np.ndarray) -> np.ndarray:
    if t.kind == "edge":
        return loads[:, 0]
    gc = loads.max(axis=1)
    return gc if t.kind == GLOBAL else throughput_from_gc(gc)


def sample_target(net: Network, f: Routing, tset: TSetSpec, target, m: int,
                  cfg: SamplerConfig | None = None, sampler: Sampler | None = None) -> np.ndarray:
    """Statistic values (edge load, GC or TP) over ``m`` samples of ``tset``.

    Passing ``sampler`` continues an existing stream instead of starting a
    new one from ``cfg``.
    """
    if m < 1:
        raise StructuralError("sample count must be >= 1")
    if tset.n != net.n:
        raise StructuralError(f"T-Set dimension {tset.n} does not match network size {net.n}")
    t = _resolve(net, f, target)
    sampler = sampler or Sampler(tset, cfg)
    F = np.ascontiguousarray(t.F)
    Fm = F.reshape(len(F), -1).T
    out = []
    for chunk in sampler.iter_blocks(m):
        if tset.discrete:
            flows = _kernels.permutation_loads(F, np.ascontiguousarray(chunk, dtype=np.int64))
        else:
            flows = chunk.reshape(len(chunk), -1) @ Fm
        out.append(_reduce(t, flows / t.caps))
    return np.concatenate(out)


def _range(t: _Target, tset: TSetSpec) -> tuple[float, float]:
    worst = _worst(t, tset)
    if t.kind == THROUGHPUT:
        lo = min(1.0, 1.0 / worst) if worst > 0 else 1.0
        return lo, 1.0
    return 0.0, worst


def histogram_plot(values: np.ndarray, label: str, tset: TSetSpec, lo: float, hi: float,
                   bins: int = DEFAULT_BINS, meta: dict | None = None) -> TPlot:
    """Fixed-range histogram; a degenerate range becomes one narrow bin."""
    values = np.asarray(values, dtype=float)
    if hi <= lo:
        hi = lo + 1e-9 * max(1.0, abs(lo))
        bins = 1
    clipped = np.clip(values, lo, hi)
    counts, edges = np.histogram(clipped, bins=bins, range=(lo, hi))
    meta = dict(meta or {})
    if values.size:
        meta.update(min=float(values.min()), max=float(values.max()),
                    sum=float(values.sum()), sumsq=float((values * values).sum()))
    return TPlot(label, tset, counts, edges=edges, meta=meta)


def build_tplot(net: Network, f: Routing, tset: TSetSpec, target, m: int, bins: int = DEFAULT_BINS,
                seed: int | None = None, cfg: SamplerConfig | None = None, sampler: Sampler | None = None,
                chains: int = 1) -> TPlot:
    """Sampled T-Plot of an edge, a dummy edge, ``"global"`` or ``"throughput"``.

    Bins span ``[0, worst case]`` (``[1/worst GC, 1]`` for throughput), so
    plots over different parts of one stream merge exactly.  With
    ``chains > 1`` the samples are split across independent chains seeded
    by :func:`~tplots.tset.derive_seed`.
    """
    if bins < 1:
        raise StructuralError("bins must be >= 1")
    if chains < 1:
        raise StructuralError("chains must be >= 1")
    cfg = cfg or SamplerConfig()
    if seed is not None:
        cfg = SamplerConfig(seed, cfg.burn_in, cfg.thinning, cfg.step_scale, cfg.move, cfg.block)
    t = _resolve(net, f, target)
    lo, hi = _range(t, tset)
    meta = {"seed": int(cfg.seed), "m": int(m), "bins": int(bins), "chains": int(chains)}
    if isinstance(target, DummyEdge):
        meta["parts"] = list(target.parts)
    if sampler is not None or chains == 1:
        values = sample_target(net, f, tset, target, m, cfg, sampler)
    else:
        sizes = [m // chains + (1 if c < m % chains else 0) for c in range(chains)]
        parts = []
        for c, size in enumerate(sizes):
            if size:
                ccfg = SamplerConfig(derive_seed(cfg.seed, c), cfg.burn_in, cfg.thinning, cfg.step_scale,
                                     cfg.move, cfg.block)
                parts.append(sample_target(net, f, tset, target, size, ccfg))
        values = np.concatenate(parts)
    return histogram_plot(values, t.label, tset, lo, hi, bins, meta)


def exact_tplot_permutations(net: Network, f: Routing, target, zero_diagonal: bool = False,
                             limit: int = EXACT_LIMIT, long_run: bool = False,
                             chunk: int = 1 << 20) -> TPlot:
    """Exact distribution over all permutations (or derangements) of the node set.

    Refuses ``n > limit``; ``long_run`` raises the limit to 11.
    """
    n = net.n
    cap = max(limit, LONG_RUN_LIMIT) if long_run else limit
    if n > cap:
        raise EnumerationLimitError(
            f"exhaustive enumeration over {n}! permutations exceeds the limit n <= {cap}; "
            "pass long_run=True (CLI: --long-run) for n up to 11"
        )
    t = _resolve(net, f, target)
    F = np.ascontiguousarray(t.F, dtype=float)
    caps = np.ascontiguousarray(t.caps, dtype=float)
    perm = np.arange(n, dtype=np.int64)
    remaining = math.factorial(n)
    vals_out = np.empty(min(chunk, remaining))
    valid = np.empty(min(chunk, remaining), dtype=np.bool_)
    atoms = np.empty(0)
    counts = np.empty(0, dtype=np.int64)
    sums = np.empty(0)
    while remaining > 0:
        k = min(chunk, remaining)
        done = _kernels.enumerate_max_loads(F, caps, perm, k, zero_diagonal, vals_out, valid)
        v = vals_out[:done][valid[:done]]
        if t.kind == THROUGHPUT:
            v = throughput_from_gc(v)
        a, c = _group_atoms(np.concatenate([atoms, v]),
                            np.concatenate([counts, np.ones(v.size, dtype=np.int64)]),
                            np.concatenate([sums, v]))
        sums = a * c
        atoms, counts = a, c
        remaining -= done
    kind = "P_d" if zero_diagonal else "P"
    meta = {"enumerated": int(counts.sum())}
    if isinstance(target, DummyEdge):
        meta["parts"] = list(target.parts)
    return TPlot(t.label, TSetSpec(kind, n), counts, atoms=atoms, exact=True, meta=meta)


# -- Gaussian parameters --------------------------------------------------

@dataclass(frozen=True)
class GaussianParams:
    mu: float
    sigma: float
    method: str

    def __post_init__(self):
        if not self.sigma >= 0:
            raise StructuralError("sigma must be >= 0")

    @property
    def variance(self) -> float:
        return self.sigma ** 2


_METHODS = {
    "P": "closed-form-P",
    "P_d": "closed-form-Pd",
    "S": "semi-analytic-S",
    "S_d": "semi-analytic-S",
    "A": "mc-moments-A",
    "A_d": "mc-moments-A",
    "H": "mc-moments-H",
}


def load_moments(flows: np.ndarray, capacity: float, tset: TSetSpec,
                 moments: MomentTable | None = None) -> tuple[float, float]:
    """Mean and second moment of one flow pattern's load over ``tset``."""
    flows = np.asarray(flows, dtype=float).copy()
    np.fill_diagonal(flows, 0.0)  # self-demand never loads an edge
    n = tset.n
    if tset.kind in ("P", "P_d"):
        first, w = permutation_weights(n, tset.zero_diagonal)
        sums = class_sums(flows, tset.zero_diagonal)
        mean = first * flows.sum() / capacity
        second = sum(w[c] * sums[c] for c in w) / capacity ** 2
        return float(mean), float(second)
    if tset.kind == "H_surface":
        raise UnsupportedModeError("no moment tables for H_surface; use empirical_params on samples")
    table = moments if moments is not None else find_table(tset)
    if not table.matches(tset):
        raise StructuralError(f"moment table for {table.kind}({table.n}) does not match {tset.label()}")
    if tset.kind == "H":
        v = flows.ravel()
        mean = float(v @ np.asarray(table.first).ravel()) / capacity
        second = float(v @ np.asarray(table.second) @ v) / capacity ** 2
        return mean, second
    sums = class_sums(flows, tset.zero_diagonal)
    if tset.kind == "S":
        first = 1.0 / n
    elif tset.kind == "S_d":
        first = 1.0 / (n - 1)
    else:
        first = float(table.first)
    mean = first * flows.sum() / capacity
    second = sum(table.second[c] * sums[c] for c in table.second) / capacity ** 2
    return float(mean), float(second)


def gaussian_params(net: Network, f: Routing, e, tset: TSetSpec, moments: MomentTable | None = None) -> GaussianParams:
    """Mean and standard deviation of the load on ``e`` over ``tset``.

    ``P`` and ``P_d`` use exact closed forms.  ``S`` and ``S_d`` have exact
    means and take second moments from a moment table; ``A``, ``A_d`` and
    ``H`` take both from a table (``moments`` or the on-disk cache).
    """
    if tset.n != net.n:
        raise StructuralError(f"T-Set dimension {tset.n} does not match network size {net.n}")
    flows, cap = target_flows(net, f, e)
    mean, second = load_moments(flows, cap, tset, moments)
    var = max(second - mean * mean, 0.0)
    return GaussianParams(mean, math.sqrt(var), _METHODS[tset.kind])


def empirical_params(samples) -> GaussianParams:
    x = np.asarray(samples, dtype=float)
    return GaussianParams(float(x.mean()), float(x.std()), "empirical")


# -- summaries ------------------------------------------------------------

@dataclass(frozen=True)
class TPlotStats:
    mean: float
    variance: float
    quantile: float | None
    worst: float


def quantile(tp: TPlot, q: float) -> float:
    """Smallest bin upper edge (or atom) whose CDF reaches ``q``."""
    if not 0.0 <= q <= 1.0:
        raise StructuralError("quantile level must lie in [0, 1]")
    cdf = tp.cdf()
    idx = int(np.searchsorted(cdf, q - 1e-12, side="left"))
    return float(tp.upper[min(idx, len(cdf) - 1)])


def tplot_stats(tp: TPlot, q: float | None = None) -> TPlotStats:
    """Mean and variance from bin midpoints (or atoms), optional quantile, largest observed value."""
    if tp.total < 1:
        raise StructuralError("empty T-Plot")
    p = tp.pdf()
    x = tp.support
    mean = float(p @ x)
    var = float(p @ (x - mean) ** 2)
    nz = np.flatnonzero(tp.counts)
    worst = float(tp.meta.get("max", tp.upper[nz[-1]])) if tp.binned else float(tp.atoms[nz[-1]])
    return TPlotStats(mean, var, None if q is None else quantile(tp, q), worst)


def throughput_ccdf(tp: TPlot) -> TPlot:
    """Throughput plot from a global-congestion plot; read it with :meth:`TPlot.tail_at`.

    Histogram bins map through their upper edges, so throughput is never
    overstated.
    """
    if tp.target != GLOBAL:
        raise StructuralError("throughput_ccdf needs a global-congestion T-Plot")
    gc = tp.upper if tp.binned else tp.atoms
    keep = tp.counts > 0
    tps = throughput_from_gc(gc[keep])
    order = np.argsort(tps)
    atoms, counts = _group_atoms(np.atleast_1d(tps)[order], tp.counts[keep][order])
    meta = dict(tp.meta, form="ccdf", source="bins" if tp.binned else "atoms")
    return TPlot(THROUGHPUT, tp.tset, counts, atoms=atoms, exact=tp.exact, meta=meta)


def ccdf_at(tp: TPlot, t) -> np.ndarray | float:
    """Fraction of matrices whose statistic is at least ``t``."""
    return tp.tail_at(t, inclusive=True)


def all_edge_tplots(net: Network, f: Routing, tset: TSetSpec, m: int, bins: int = DEFAULT_BINS,
                    cfg: SamplerConfig | None = None) -> tuple[dict[str, TPlot], TPlot]:
    """Per-edge plots and the global plot from one shared sample stream."""
    cfg = cfg or SamplerConfig()
    t = _resolve(net, f, GLOBAL)
    sampler = Sampler(tset, cfg)
    F = np.ascontiguousarray(t.F)
    Fm = F.reshape(len(F), -1).T
    loads = []
    for chunk in sampler.iter_blocks(m):
        if tset.discrete:
            flows = _kernels.permutation_loads(F, np.ascontiguousarray(chunk, dtype=np.int64))
        else:
            flows = chunk.reshape(len(chunk), -1) @ Fm
        loads.append(flows / t.caps)
    loads = np.concatenate(loads)
    meta = {"seed": int(cfg.seed), "m": int(m), "bins": int(bins)}
    plots = {}
    worst = []
    for k, edge in enumerate(net.edges):
        w = worst_case_load(t.F[k], t.caps[k], tset)
        worst.append(w)
        plots[edge.id] = histogram_plot(loads[:, k], edge.id, tset, 0.0, w, bins, meta)
    glob = histogram_plot(loads.max(axis=1), GLOBAL, tset, 0.0, max(worst), bins, meta)
    return plots, glob


def exact_all_edges(net: Network, f: Routing, zero_diagonal: bool = False,
                    limit: int = EXACT_LIMIT) -> tuple[dict[str, TPlot], TPlot]:
    """Exact per-edge and global plots over all permutations (small n)."""
    if net.n > limit:
        raise EnumerationLimitError(f"n = {net.n} exceeds the enumeration limit {limit}")
    perms = np.array(list(itertools.permutations(range(net.n))), dtype=np.int64)
    if zero_diagonal:
        perms = perms[~(perms == np.arange(net.n)).any(axis=1)]
    loads = _kernels.permutation_loads(np.ascontiguousarray(f.fractions, dtype=float), perms) / net.capacities
    tset = TSetSpec("P_d" if zero_diagonal else "P", net.n)
    plots = {e.id: atom_plot(loads[:, k], e.id, tset, exact=True) for k, e in enumerate(net.edges)}
    return plots, atom_plot(loads.max(axis=1), GLOBAL, tset, exact=True)
