"""T-Sets, membership tests and uniform samplers.

Discrete T-Sets (permutations ``P`` and derangements ``P_d``) are sampled
directly.  Continuous T-Sets are sampled with symmetric random walks that
reject proposals leaving the set, so the stationary law is uniform:

* ``A``, ``A_d``, ``H``: Gaussian ball walk.  ``move="coordinate"`` perturbs
  one free entry per step; ``move="full"`` perturbs every free entry at once.
* ``S``, ``S_d``, ``H_surface``: the four-index walk, which adds
  ``-d, +d, +d, -d`` on a 2x2 sub-rectangle so row and column sums never
  change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Sequence

import numpy as np

from . import _kernels
from .exceptions import StructuralError, UnsupportedModeError

KINDS = ("P", "P_d", "S", "S_d", "A", "A_d", "H", "H_surface")
WALK_KINDS = ("S", "S_d", "A", "A_d", "H", "H_surface")
SUM_TOL = 1e-9
MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class TSetSpec:
    """A T-Set: its kind, dimension and (for ``H`` kinds) the rate vectors."""

    kind: str
    n: int
    r: tuple[float, ...] | None = None
    q: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise StructuralError(f"unknown T-Set kind {self.kind!r}; expected one of {KINDS}")
        if self.n < 2:
            raise StructuralError("T-Sets need n >= 2")
        if self.kind in ("H", "H_surface"):
            if self.r is None or self.q is None:
                raise StructuralError("heterogeneous T-Sets need rate vectors r and q")
            r = tuple(float(x) for x in self.r)
            q = tuple(float(x) for x in self.q)
            if len(r) != self.n or len(q) != self.n:
                raise StructuralError("rate vectors must have length n")
            if min(r) <= 0 or min(q) <= 0:
                raise StructuralError("heterogeneous rates must be positive")
            if self.kind == "H_surface" and not math.isclose(sum(r), sum(q), rel_tol=1e-12, abs_tol=1e-12):
                raise StructuralError("H_surface is empty unless sum(r) == sum(q)")
            object.__setattr__(self, "r", r)
            object.__setattr__(self, "q", q)
        if self.kind == "S_d" and self.n == 3:
            # the 3x3 zero-diagonal doubly stochastic set has no 2x2 rectangle off the diagonal
            raise UnsupportedModeError("the four-index walk cannot move on S_d with n = 3")

    @classmethod
    def from_network(cls, kind: str, net) -> "TSetSpec":
        if kind in ("H", "H_surface"):
            return cls(kind, net.n, tuple(net.ingress), tuple(net.egress))
        return cls(kind, net.n)

    @property
    def zero_diagonal(self) -> bool:
        return self.kind.endswith("_d")

    @property
    def discrete(self) -> bool:
        return self.kind in ("P", "P_d")

    @property
    def surface(self) -> bool:
        return self.kind in ("S", "S_d", "H_surface")

    def row_caps(self) -> np.ndarray:
        return np.array(self.r) if self.r is not None else np.ones(self.n)

    def col_caps(self) -> np.ndarray:
        return np.array(self.q) if self.q is not None else np.ones(self.n)

    def free_mask(self) -> np.ndarray:
        mask = np.ones((self.n, self.n), dtype=bool)
        if self.zero_diagonal:
            np.fill_diagonal(mask, False)
        return mask

    def label(self) -> str:
        return f"{self.kind}({self.n})"


def contains(tset: TSetSpec, D, tol: float = SUM_TOL) -> bool:
    """Membership of ``D`` in ``tset``: exact for permutation kinds, ``tol`` on sums otherwise."""
    D = np.asarray(D, dtype=float)
    if D.shape != (tset.n, tset.n):
        raise StructuralError(f"matrix shape {D.shape} does not match T-Set dimension {tset.n}")
    if tset.zero_diagonal and np.any(np.diag(D) != 0):
        return False
    rows, cols = D.sum(axis=1), D.sum(axis=0)
    if tset.discrete:
        if not np.all((D == 0) | (D == 1)):
            return False
        return bool(np.all(rows == 1) and np.all(cols == 1))
    if np.any(D < -tol):
        return False
    rcap, ccap = tset.row_caps(), tset.col_caps()
    if tset.surface:
        return bool(np.all(np.abs(rows - rcap) <= tol) and np.all(np.abs(cols - ccap) <= tol))
    return bool(np.all(rows <= rcap + tol) and np.all(cols <= ccap + tol))


@dataclass(frozen=True)
class SamplerConfig:
    """Random-walk settings; ``None`` fields take size-dependent defaults.

    ``step_scale`` is the per-entry standard deviation of a proposal
    (default ``sqrt(1/(2n))``).  ``burn_in`` defaults to ``10 n^2`` steps and
    ``thinning`` to ``8 n^2`` steps between retained samples.
    """

    seed: int = 0
    burn_in: int | None = None
    thinning: int | None = None
    step_scale: float | None = None
    move: str = "coordinate"
    block: int = 2048

    def __post_init__(self):
        if self.burn_in is not None and self.burn_in < 0:
            raise StructuralError("burn_in must be >= 0")
        if self.thinning is not None and self.thinning < 1:
            raise StructuralError("thinning must be >= 1")
        if self.step_scale is not None and not self.step_scale > 0:
            raise StructuralError("step_scale must be > 0")
        if self.move not in ("coordinate", "full"):
            raise StructuralError("move must be 'coordinate' or 'full'")
        if self.block < 1:
            raise StructuralError("block must be >= 1")

    def resolved(self, n: int) -> "SamplerConfig":
        return replace(
            self,
            burn_in=10 * n * n if self.burn_in is None else self.burn_in,
            thinning=8 * n * n if self.thinning is None else self.thinning,
            step_scale=math.sqrt(1.0 / (2 * n)) if self.step_scale is None else self.step_scale,
        )


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, chain: int) -> int:
    """Seed of chain ``chain``: ``splitmix64(master + chain * 0x9E3779B97F4A7C15)``."""
    return splitmix64((int(master) + int(chain) * 0x9E3779B97F4A7C15) & MASK64)


def start_matrix(tset: TSetSpec) -> np.ndarray:
    """Default initial point of a walk (or a member of a discrete T-Set)."""
    n = tset.n
    if tset.kind == "P":
        return np.eye(n)
    if tset.kind == "P_d":
        return np.roll(np.eye(n), 1, axis=1)
    if tset.kind == "S":
        return np.full((n, n), 1.0 / n)
    if tset.kind == "S_d":
        D = np.full((n, n), 1.0 / (n - 1))
        np.fill_diagonal(D, 0.0)
        return D
    if tset.kind == "H_surface":
        r, q = tset.row_caps(), tset.col_caps()
        return np.outer(r, q) / r.sum()
    return np.zeros((n, n))


def _proposal_scale(tset: TSetSpec, cfg: SamplerConfig) -> np.ndarray:
    """Per-entry proposal standard deviation, ``(n, n)``."""
    s = cfg.step_scale
    if tset.kind == "H":
        return np.repeat(tset.row_caps()[:, None] * s, tset.n, axis=1)
    if tset.kind == "H_surface":
        return np.full((tset.n, tset.n), s * float(np.mean(tset.row_caps())))
    return np.full((tset.n, tset.n), s)


def walk_step(tset: TSetSpec, rng: np.random.Generator, D, cfg: SamplerConfig | None = None) -> np.ndarray:
    """One proposal of the walk for ``tset``; returns the new (or unchanged) matrix."""
    if tset.discrete:
        raise UnsupportedModeError("discrete T-Sets are sampled directly, not by walking")
    cfg = (cfg or SamplerConfig()).resolved(tset.n)
    D = np.array(D, dtype=float)
    n = tset.n
    scale = _proposal_scale(tset, cfg)
    P = D.copy()
    if tset.surface:
        i1, j1, i2, j2 = np.minimum((rng.random(4) * n).astype(int), n - 1)
        d = rng.standard_normal() * scale[0, 0]
        P[i1, j1] -= d
        P[i2, j2] -= d
        P[i1, j2] += d
        P[i2, j1] += d
        if i1 == i2 or j1 == j2:
            return D
    elif cfg.move == "coordinate":
        free = np.argwhere(tset.free_mask())
        k = min(int(rng.random() * len(free)), len(free) - 1)
        i, j = free[k]
        P[i, j] += rng.standard_normal() * scale[i, j]
    else:
        P += rng.standard_normal((n, n)) * scale * tset.free_mask()
    return P if _inside(tset, P) else D


def _inside(tset: TSetSpec, P: np.ndarray) -> bool:
    # strict version of contains() for proposals: no tolerance on the inequalities
    if np.any(P < 0):
        return False
    if tset.zero_diagonal and np.any(np.diag(P) != 0):
        return False
    if tset.surface:
        return True
    return bool(np.all(P.sum(axis=1) <= tset.row_caps()) and np.all(P.sum(axis=0) <= tset.col_caps()))


def sample_permutation(rng: np.random.Generator, n: int, zero_diagonal: bool = False) -> np.ndarray:
    """Uniform permutation matrix; uniform derangement matrix by rejection when ``zero_diagonal``."""
    sigma = _permutations(rng, 1, n, zero_diagonal)[0]
    return permutation_matrices(sigma[None])[0]


def _permutations(rng, m: int, n: int, zero_diagonal: bool) -> np.ndarray:
    sigma = np.argsort(rng.random((m, n)), axis=1)
    if zero_diagonal:
        idx = np.arange(n)
        bad = np.flatnonzero((sigma == idx).any(axis=1))
        while bad.size:
            sigma[bad] = np.argsort(rng.random((bad.size, n)), axis=1)
            bad = bad[(sigma[bad] == idx).any(axis=1)]
    return sigma


def permutation_matrices(sigma: np.ndarray) -> np.ndarray:
    """``(m, n)`` permutation index arrays to ``(m, n, n)`` 0-1 matrices."""
    sigma = np.asarray(sigma)
    m, n = sigma.shape
    out = np.zeros((m, n, n))
    out[np.arange(m)[:, None], np.arange(n)[None, :], sigma] = 1.0
    return out


class Sampler:
    """Stateful stream of uniform samples from one T-Set.

    Samples are produced in fixed-size blocks, so splitting a stream into
    several :meth:`draw` calls yields exactly the samples of one long call.
    """

    def __init__(self, tset: TSetSpec, cfg: SamplerConfig | None = None, start=None):
        self.tset = tset
        self.cfg = (cfg or SamplerConfig()).resolved(tset.n)
        ss = np.random.SeedSequence(int(self.cfg.seed) & MASK64)
        self._u_rng, self._z_rng = (np.random.default_rng(s) for s in ss.spawn(2))
        self.state = start_matrix(tset) if start is None else np.array(start, dtype=float)
        if not contains(tset, self.state):
            raise StructuralError(f"start matrix is not in {tset.label()}")
        self._buffer: np.ndarray | None = None
        self._burned = tset.discrete or self.cfg.burn_in == 0
        self.proposed = 0
        self.accepted = 0
        if not tset.discrete:
            self._scale = _proposal_scale(tset, self.cfg)
            mask = tset.free_mask()
            self._free_i, self._free_j = (a.astype(np.int64) for a in np.nonzero(mask))
            self._free_scale = self._scale[mask]

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float("nan")

    def _walk(self, count: int, thin: int) -> np.ndarray:
        tset, n = self.tset, self.tset.n
        out = np.empty((count, n, n))
        steps = count * thin
        D = self.state
        if tset.surface:
            u = self._u_rng.random((steps, 4))
            z = self._z_rng.standard_normal(steps)
            acc = _kernels.four_index_walk(D, tset.zero_diagonal, float(self._scale[0, 0]), u, z, thin, out)
        elif self.cfg.move == "coordinate":
            u = self._u_rng.random(steps)
            z = self._z_rng.standard_normal(steps)
            acc = _kernels.coordinate_walk(
                D, D.sum(axis=1), D.sum(axis=0), tset.row_caps(), tset.col_caps(),
                self._free_i, self._free_j, self._free_scale, u, z, thin, out,
            )
        else:
            z = self._z_rng.standard_normal((steps, n, n))
            acc = _kernels.full_walk(
                D, tset.row_caps(), tset.col_caps(), tset.free_mask(), self._scale, z, thin, out
            )
        self.proposed += steps
        self.accepted += int(acc)
        return out

    def _next_block(self) -> np.ndarray:
        B = self.cfg.block
        if self.tset.discrete:
            return _permutations(self._u_rng, B, self.tset.n, self.tset.zero_diagonal)
        if not self._burned:
            self._walk(1, self.cfg.burn_in)
            self._burned = True
        return self._walk(B, self.cfg.thinning)

    def _take(self, m: int) -> np.ndarray:
        parts, have = [], 0
        if self._buffer is not None and len(self._buffer):
            parts.append(self._buffer[:m])
            have = len(parts[0])
            self._buffer = self._buffer[have:]
        while have < m:
            block = self._next_block()
            need = m - have
            parts.append(block[:need])
            self._buffer = block[need:]
            have += len(parts[-1])
        return np.concatenate(parts) if len(parts) > 1 else parts[0]

    def draw(self, m: int) -> np.ndarray:
        """Next ``m`` samples as an ``(m, n, n)`` array."""
        if m < 1:
            raise StructuralError("sample count must be >= 1")
        native = self._take(m)
        if self.tset.discrete:
            return permutation_matrices(native)
        return native

    def draw_permutations(self, m: int) -> np.ndarray:
        """Next ``m`` samples of a discrete T-Set as ``(m, n)`` index arrays."""
        if not self.tset.discrete:
            raise UnsupportedModeError("only P and P_d have permutation representations")
        return self._take(m)

    def iter_blocks(self, m: int, size: int | None = None) -> Iterator[np.ndarray]:
        """Yield the next ``m`` samples in chunks (matrices, or index arrays for P kinds)."""
        size = size or self.cfg.block
        done = 0
        while done < m:
            k = min(size, m - done)
            yield self._take(k)
            done += k

    def loads(self, F: np.ndarray, capacities: np.ndarray, m: int) -> np.ndarray:
        """Loads ``(m, k)`` of ``k`` flow patterns ``F`` (``(k, n, n)``) over the next ``m`` samples."""
        F = np.ascontiguousarray(F, dtype=float)
        capacities = np.asarray(capacities, dtype=float)
        out = []
        for chunk in self.iter_blocks(m):
            if self.tset.discrete:
                flows = _kernels.permutation_loads(F, np.ascontiguousarray(chunk, dtype=np.int64))
            else:
                flows = chunk.reshape(len(chunk), -1) @ F.reshape(len(F), -1).T
            out.append(flows / capacities)
        return np.concatenate(out)


def sample_stream(tset: TSetSpec, cfg: SamplerConfig | None = None, m: int = 1) -> np.ndarray:
    """``m`` samples from ``tset``; i.i.d. for discrete kinds, a thinned walk otherwise."""
    return Sampler(tset, cfg).draw(m)


@dataclass
class ConvergenceReport:
    m_values: tuple[int, ...]
    p: float
    variance: dict[int, float]
    expected_variance: dict[int, float]
    repetitions: int
    sup_distance: float
    two_start_m: int
    acceptance_rate: float
    extras: dict = field(default_factory=dict)

    def variance_ratio(self, m_small: int, m_large: int) -> float:
        """Observed ``var(m_small)/var(m_large)`` divided by the ideal ``m_large/m_small``."""
        if self.variance[m_large] == 0:
            return float("nan") if self.variance[m_small] else 1.0
        return (self.variance[m_small] / self.variance[m_large]) / (m_large / m_small)


def ecdf_sup_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Sup-distance between the empirical CDFs of two samples."""
    a, b = np.sort(np.asarray(a)), np.sort(np.asarray(b))
    grid = np.concatenate([a, b])
    Fa = np.searchsorted(a, grid, side="right") / len(a)
    Fb = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.max(np.abs(Fa - Fb)))


def convergence_diagnostics(
    tset: TSetSpec,
    cfg: SamplerConfig | None,
    statistic: Callable[[np.ndarray], np.ndarray],
    bin_range: tuple[float, float],
    m_values: Sequence[int] = (10**2, 10**3, 10**4, 10**5),
    repetitions: int = 50,
    starts: tuple | None = None,
    two_start_m: int | None = None,
) -> ConvergenceReport:
    """Variance of a bin-indicator estimator across repeated chains, and a two-start comparison.

    ``statistic`` maps a stack of matrices ``(k, n, n)`` to ``k`` scalars; the
    indicator is ``lo <= statistic < hi``.  Repetition ``r`` runs an
    independent chain seeded with ``derive_seed(seed, r)``; the estimator at
    size ``m`` is the indicator mean over the first ``m`` retained samples.
    The two-start check runs chains from ``starts`` (default: the default
    start and a permutation matrix, which lies in A, S and P) and reports
    the sup-distance between the empirical CDFs of ``statistic``.
    """
    cfg = (cfg or SamplerConfig()).resolved(tset.n)
    m_values = tuple(sorted(int(m) for m in m_values))
    m_max = m_values[-1]
    lo, hi = bin_range
    estimates = {m: [] for m in m_values}
    hits_total, count_total = 0, 0
    acc, prop = 0, 0
    for rep in range(repetitions):
        s = Sampler(tset, replace(cfg, seed=derive_seed(cfg.seed, rep)))
        hits = []
        for chunk in s.iter_blocks(m_max):
            mats = chunk if not tset.discrete else permutation_matrices(chunk)
            x = statistic(mats)
            hits.append((x >= lo) & (x < hi))
        hits = np.concatenate(hits)
        csum = np.cumsum(hits)
        for m in m_values:
            estimates[m].append(csum[m - 1] / m)
        hits_total += int(csum[-1])
        count_total += m_max
        acc += s.accepted
        prop += s.proposed
    p = hits_total / count_total
    variance = {m: float(np.var(estimates[m], ddof=1)) if repetitions > 1 else float("nan") for m in m_values}
    expected = {m: p * (1 - p) / m for m in m_values}

    two_start_m = two_start_m or m_max
    if starts is None:
        alt = np.eye(tset.n) if not tset.zero_diagonal else np.roll(np.eye(tset.n), 1, axis=1)
        if tset.kind in ("H", "H_surface"):
            alt = start_matrix(tset) * 0.5 if tset.kind == "H" else start_matrix(tset)
        starts = (start_matrix(tset), alt)
    stats = []
    for k, start in enumerate(starts):
        s = Sampler(tset, replace(cfg, seed=derive_seed(cfg.seed, 10_000 + k)), start=start)
        vals = [statistic(c if not tset.discrete else permutation_matrices(c)) for c in s.iter_blocks(two_start_m)]
        stats.append(np.concatenate(vals))
    sup = ecdf_sup_distance(stats[0], stats[1])
    return ConvergenceReport(
        m_values=m_values,
        p=p,
        variance=variance,
        expected_variance=expected,
        repetitions=repetitions,
        sup_distance=sup,
        two_start_m=two_start_m,
        acceptance_rate=acc / prop if prop else float("nan"),
    )
