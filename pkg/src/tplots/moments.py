"""First and second moments of traffic-matrix entries over T-Sets.

Load moments reduce to entry moments::

    E[load]   = sum_ij f_ij E[D_ij] / c
    E[load^2] = sum_ijkl f_ij f_kl E[D_ij D_kl] / c^2

For exchangeable T-Sets, ``E[D_ij D_kl]`` depends only on how the index
pairs ``(i, j)`` and ``(k, l)`` relate, so ``sum_ijkl f_ij f_kl w(ij, kl)``
splits into a few class sums that cost ``O(n^2)``.  Kinds without zero
diagonal (``P``, ``S``, ``A``) are invariant under independent row and
column permutations and need the classes ``same``, ``row``, ``col`` and
``disjoint``.  Zero-diagonal kinds are only invariant under simultaneous
permutations, which splits ``disjoint`` into ``transposed`` ((i,j),(j,i)),
``chain`` ((i,j),(k,i) or (i,j),(j,l)) and ``distinct`` (four different
indices).

Exact weights for ``P`` and ``P_d`` come from counting permutations; the
continuous kinds use Monte Carlo :class:`MomentTable` objects.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import MissingMomentTableError, StructuralError
from .tset import Sampler, SamplerConfig, TSetSpec

PLAIN_CLASSES = ("same", "row", "col", "disjoint")
ZD_CLASSES = ("same", "row", "col", "transposed", "chain", "distinct")
TABLE_KINDS = ("S", "S_d", "A", "A_d", "H")
CACHE_ENV = "TPLOTS_CACHE_DIR"


def class_sums(X: np.ndarray, zero_diagonal: bool) -> dict[str, np.ndarray]:
    """Sums of ``X_ij X_kl`` over each index-relation class.

    ``X`` may be a single ``(n, n)`` matrix or a stack ``(m, n, n)``; the
    diagonal is ignored when ``zero_diagonal``.
    """
    X = np.asarray(X, dtype=float)
    if zero_diagonal:
        X = X.copy()
        idx = np.arange(X.shape[-1])
        X[..., idx, idx] = 0.0
    S = X.sum(axis=(-2, -1))
    Q = (X * X).sum(axis=(-2, -1))
    R = X.sum(axis=-1)
    C = X.sum(axis=-2)
    R2 = (R * R).sum(axis=-1)
    C2 = (C * C).sum(axis=-1)
    out = {"same": Q, "row": R2 - Q, "col": C2 - Q}
    disjoint = S * S - R2 - C2 + Q
    if not zero_diagonal:
        out["disjoint"] = disjoint
        return out
    T = (X * np.swapaxes(X, -1, -2)).sum(axis=(-2, -1))
    chain = 2.0 * ((R * C).sum(axis=-1) - T)
    out["transposed"] = T
    out["chain"] = chain
    out["distinct"] = disjoint - T - chain
    return out


def pair_counts(n: int, zero_diagonal: bool) -> dict[str, float]:
    ones = np.ones((n, n))
    return {k: float(v) for k, v in class_sums(ones, zero_diagonal).items()}


def _restricted_bijections(m: int, t: int) -> int:
    """Bijections between two m-sets sharing ``t`` elements, with no shared element fixed."""
    if m < 0 or t < 0 or t > m:
        return 0
    return sum((-1) ** s * math.comb(t, s) * math.factorial(m - s) for s in range(t + 1))


def derangement_count(n: int) -> int:
    return _restricted_bijections(n, n)


def permutation_weights(n: int, zero_diagonal: bool) -> tuple[float, dict[str, float]]:
    """Exact ``E[sigma_ij]`` and per-class ``E[sigma_ij sigma_kl]`` over P(n) or P_d(n)."""
    if not zero_diagonal:
        w = {
            "same": 1.0 / n,
            "row": 0.0,
            "col": 0.0,
            "disjoint": 1.0 / (n * (n - 1)) if n > 1 else 0.0,
        }
        return 1.0 / n, w
    total = derangement_count(n)
    w = {
        "same": _restricted_bijections(n - 1, n - 2) / total,
        "row": 0.0,
        "col": 0.0,
        "transposed": _restricted_bijections(n - 2, n - 2) / total,
        "chain": _restricted_bijections(n - 2, n - 3) / total,
        "distinct": _restricted_bijections(n - 2, n - 4) / total,
    }
    return 1.0 / (n - 1), w


def _batch_se(x: np.ndarray, batches: int = 50) -> np.ndarray:
    """Batch-means standard error of the mean along axis 0."""
    m = x.shape[0]
    b = min(batches, m)
    size = m // b
    if size < 1:
        return np.full(x.shape[1:], np.nan)
    means = x[: b * size].reshape((b, size) + x.shape[1:]).mean(axis=1)
    return means.std(axis=0, ddof=1) / math.sqrt(b)


@dataclass
class MomentTable:
    """Monte Carlo estimates of entry moments for one T-Set.

    For exchangeable kinds ``first`` is a scalar (common mean of every free
    entry) and ``second`` maps class name to ``E[D_ij D_kl]``.  For ``H``,
    ``first`` is the ``(n, n)`` mean matrix and ``second`` the full
    ``(n^2, n^2)`` matrix of ``E[D_ij D_kl]``.
    """

    kind: str
    n: int
    seed: int
    m: int
    first: float | np.ndarray
    first_se: float | np.ndarray
    second: dict[str, float] | np.ndarray
    second_se: dict[str, float] | np.ndarray
    rates: tuple[tuple[float, ...], tuple[float, ...]] | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def enc(x):
            if isinstance(x, np.ndarray):
                return x.tolist()
            return x

        return {
            "kind": self.kind,
            "n": self.n,
            "seed": self.seed,
            "m": self.m,
            "first": enc(self.first),
            "first_se": enc(self.first_se),
            "second": enc(self.second),
            "second_se": enc(self.second_se),
            "rates": None if self.rates is None else [list(self.rates[0]), list(self.rates[1])],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MomentTable":
        def dec(x):
            return np.array(x) if isinstance(x, list) else x

        rates = doc.get("rates")
        return cls(
            kind=doc["kind"],
            n=int(doc["n"]),
            seed=int(doc["seed"]),
            m=int(doc["m"]),
            first=dec(doc["first"]),
            first_se=dec(doc["first_se"]),
            second=dec(doc["second"]),
            second_se=dec(doc["second_se"]),
            rates=None if rates is None else (tuple(rates[0]), tuple(rates[1])),
            meta=doc.get("meta", {}),
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path: str | Path) -> "MomentTable":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def matches(self, tset: TSetSpec) -> bool:
        if self.kind != tset.kind or self.n != tset.n:
            return False
        if tset.kind == "H":
            return self.rates is not None and np.allclose(self.rates[0], tset.r) and np.allclose(self.rates[1], tset.q)
        return True


def moment_tables(tset: TSetSpec, cfg: SamplerConfig | None = None, m: int = 10**5) -> MomentTable:
    """Estimate entry moments of ``tset`` from ``m`` walk samples."""
    if tset.kind not in TABLE_KINDS:
        raise StructuralError(f"moment tables are defined for {TABLE_KINDS}, not {tset.kind}")
    if m < 10**4:
        raise StructuralError("moment tables need m >= 10^4 samples")
    cfg = (cfg or SamplerConfig()).resolved(tset.n)
    sampler = Sampler(tset, cfg)
    n = tset.n
    if tset.kind == "H":
        acc_first = np.zeros(n * n)
        acc_second = np.zeros((n * n, n * n))
        batch_first, batch_second = [], []
        # batch-means standard errors over 50 batches
        nb = 50
        sizes = [m // nb + (1 if b < m % nb else 0) for b in range(nb)]
        for size in sizes:
            X = np.concatenate(list(sampler.iter_blocks(size))).reshape(size, -1)
            bf = X.sum(axis=0)
            bs = X.T @ X
            acc_first += bf
            acc_second += bs
            batch_first.append(bf / size)
            batch_second.append(bs / size)
        first = (acc_first / m).reshape(n, n)
        second = acc_second / m
        # unequal batch sizes differ by at most one sample; treated as equal
        first_se = (np.std(batch_first, axis=0, ddof=1) / math.sqrt(nb)).reshape(n, n)
        second_se = np.std(batch_second, axis=0, ddof=1) / math.sqrt(nb)
        return MomentTable(
            tset.kind, n, int(cfg.seed), m, first, first_se, second, second_se,
            rates=(tset.r, tset.q), meta=_meta(cfg, sampler),
        )

    zd = tset.zero_diagonal
    counts = pair_counts(n, zd)
    nfree = n * n - (n if zd else 0)
    classes = ZD_CLASSES if zd else PLAIN_CLASSES
    firsts = []
    seconds = {c: [] for c in classes}
    for chunk in sampler.iter_blocks(m):
        firsts.append(chunk.sum(axis=(1, 2)) / nfree)
        sums = class_sums(chunk, zd)
        for c in classes:
            if counts[c] > 0:
                seconds[c].append(sums[c] / counts[c])
    f = np.concatenate(firsts)
    first = float(f.mean())
    first_se = float(_batch_se(f))
    second, second_se = {}, {}
    for c in classes:
        if counts[c] > 0:
            x = np.concatenate(seconds[c])
            second[c] = float(x.mean())
            second_se[c] = float(_batch_se(x))
        else:
            second[c], second_se[c] = 0.0, 0.0
    return MomentTable(tset.kind, n, int(cfg.seed), m, first, first_se, second, second_se, meta=_meta(cfg, sampler))


def _meta(cfg: SamplerConfig, sampler: Sampler) -> dict:
    return {
        "burn_in": cfg.burn_in,
        "thinning": cfg.thinning,
        "step_scale": cfg.step_scale,
        "move": cfg.move,
        "acceptance_rate": sampler.acceptance_rate,
    }


# -- cache ------------------------------------------------------------------

def cache_dir() -> Path:
    root = os.environ.get(CACHE_ENV)
    path = Path(root) if root else Path.home() / ".cache" / "tplots"
    return path


def _cache_name(tset: TSetSpec, seed: int, m: int) -> str:
    tag = ""
    if tset.kind == "H":
        digest = hashlib.sha256(json.dumps([tset.r, tset.q]).encode()).hexdigest()[:12]
        tag = f"-{digest}"
    return f"moments-{tset.kind}-n{tset.n}{tag}-seed{seed}-m{m}.json"


def save_table(table: MomentTable, directory: str | Path | None = None) -> Path:
    directory = Path(directory) if directory is not None else cache_dir()
    directory.mkdir(parents=True, exist_ok=True)
    if table.kind == "H":
        tset = TSetSpec("H", table.n, table.rates[0], table.rates[1])
    else:
        tset = TSetSpec(table.kind, table.n)
    path = directory / _cache_name(tset, table.seed, table.m)
    table.save(path)
    return path


def find_table(tset: TSetSpec, directory: str | Path | None = None) -> MomentTable:
    """Largest cached table matching ``tset``; raises if none exists."""
    directory = Path(directory) if directory is not None else cache_dir()
    best = None
    if directory.is_dir():
        for path in directory.glob(f"moments-{tset.kind}-n{tset.n}*.json"):
            table = MomentTable.load(path)
            if table.matches(tset) and (best is None or table.m > best.m):
                best = table
    if best is None:
        raise MissingMomentTableError(
            f"no moment table for {tset.label()} in {directory}; precompute one with "
            f"`tplots moments --tset {tset.kind} --n {tset.n}` or tplots.moments.moment_tables()"
        )
    return best


def get_or_compute(tset: TSetSpec, cfg: SamplerConfig | None = None, m: int = 10**5,
                   directory: str | Path | None = None) -> MomentTable:
    try:
        return find_table(tset, directory)
    except MissingMomentTableError:
        table = moment_tables(tset, cfg, m)
        save_table(table, directory)
        return table
