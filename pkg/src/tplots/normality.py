"""Normality assessment: Lilliefors test and normal probability plot data.

Critical values of the Lilliefors statistic come from a Monte Carlo
calibration shipped as ``data/lilliefors.json``.  For each sample size ``m``
on the calibration grid the table stores the scaled constant
``crit * (sqrt(m) - 0.01 + 0.85 / sqrt(m))``, which is nearly flat in ``m``;
intermediate sizes interpolate the constant linearly in ``log m`` and sizes
beyond the grid reuse the last constant.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy.special import ndtr, ndtri

from .exceptions import StructuralError

ALPHAS = (0.01, 0.05, 0.20)
CALIBRATION_SEED = 20240611
MIN_SAMPLES = 20


def _scale(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return np.sqrt(m) - 0.01 + 0.85 / np.sqrt(m)


def lilliefors_statistic(x) -> np.ndarray:
    """KS distance to the normal with the sample mean and (ddof=1) SD, along the last axis."""
    x = np.sort(np.asarray(x, dtype=float), axis=-1)
    m = x.shape[-1]
    mu = x.mean(axis=-1, keepdims=True)
    sd = x.std(axis=-1, ddof=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        cdf = ndtr((x - mu) / sd)
    i = np.arange(1, m + 1)
    d_plus = np.max(i / m - cdf, axis=-1)
    d_minus = np.max(cdf - (i - 1) / m, axis=-1)
    return np.maximum(d_plus, d_minus)


def calibrate(m_grid=(20, 30, 50, 100, 200, 500, 1000, 2000, 5000),
              replicates: int = 10**5, seed: int = CALIBRATION_SEED, batch: int = 2000) -> dict:
    """Monte Carlo quantiles of the Lilliefors statistic under normality."""
    rng = np.random.default_rng(seed)
    table = {"seed": seed, "replicates": replicates, "alphas": list(ALPHAS), "m": [], "scaled": []}
    for m in m_grid:
        stats = []
        done = 0
        while done < replicates:
            k = min(batch, replicates - done, max(1, 2_000_000 // m))
            stats.append(lilliefors_statistic(rng.standard_normal((k, m))))
            done += k
        stats = np.concatenate(stats)
        crit = np.quantile(stats, [1 - a for a in ALPHAS])
        table["m"].append(int(m))
        table["scaled"].append([float(c * _scale(m)) for c in crit])
    return table


@lru_cache(maxsize=1)
def _table() -> dict:
    text = resources.files("tplots").joinpath("data/lilliefors.json").read_text()
    return json.loads(text)


def critical_value(m: int, alpha: float) -> float:
    """Lilliefors critical value for sample size ``m`` at level ``alpha``."""
    if alpha not in ALPHAS:
        raise StructuralError(f"alpha must be one of {ALPHAS}")
    if m < MIN_SAMPLES:
        raise StructuralError(f"Lilliefors test needs at least {MIN_SAMPLES} samples")
    t = _table()
    col = t["alphas"].index(alpha)
    grid = np.log(np.array(t["m"], dtype=float))
    vals = np.array([row[col] for row in t["scaled"]])
    c = float(np.interp(math.log(m), grid, vals))  # clamps to end constants outside the grid
    return c / float(_scale(m))


@dataclass(frozen=True)
class LillieforsResult:
    statistic: float
    critical_value: float
    reject: bool
    alpha: float
    m: int
    note: str = ""


def lilliefors_test(samples, alpha: float = 0.05) -> LillieforsResult:
    """Test the hypothesis that ``samples`` come from some normal distribution."""
    x = np.asarray(samples, dtype=float).ravel()
    m = x.size
    crit = critical_value(m, alpha)
    if np.ptp(x) == 0:
        return LillieforsResult(1.0, crit, True, alpha, m, note="zero sample variance; degenerate")
    d = float(lilliefors_statistic(x))
    return LillieforsResult(d, crit, d > crit, alpha, m)


def npp_data(samples) -> np.ndarray:
    """Normal probability plot points ``(normal quantile, ordered sample)`` as an ``(m, 2)`` array."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    m = x.size
    if m < 2:
        raise StructuralError("a normal probability plot needs at least 2 samples")
    q = ndtri((np.arange(1, m + 1) - 0.5) / m)
    return np.column_stack([q, x])


def npp_correlation(samples) -> float:
    """Correlation of the normal probability plot points (1 for a perfect line)."""
    pts = npp_data(samples)
    if np.ptp(pts[:, 1]) == 0:
        return float("nan")
    return float(np.corrcoef(pts[:, 0], pts[:, 1])[0, 1])
