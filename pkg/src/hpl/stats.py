"""Estimation and hypothesis testing over replica ensembles.

An ensemble is a plain (replicas, times) array of functional values on a
common t grid.  Everything here is pure: covariance with jackknife errors,
normalization by the t = 1 standard deviation (the limit theorems fix laws
only up to a constant), variance-scaling Hurst regression with a
delta-method error, and the two-sample energy-distance permutation test used
for finite-dimensional-distribution comparisons.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .rng import derived_rng

__all__ = [
    "CovEstimate",
    "TestReport",
    "HurstEstimate",
    "estimate_covariance",
    "normalize",
    "hurst_from_variance",
    "correlation_with_se",
    "energy_distance",
    "energy_distance_test",
]


@dataclass
class CovEstimate:
    times: np.ndarray
    estimate: np.ndarray
    se: np.ndarray
    replicas: int

    def entry(self, s: float, t: float):
        i = int(np.argmin(np.abs(self.times - s)))
        j = int(np.argmin(np.abs(self.times - t)))
        return self.estimate[i, j], self.se[i, j]


@dataclass
class TestReport:
    statistic: float
    p_value: float
    replicas: tuple
    permutations: int
    seed: int

    def to_json(self) -> str:
        d = dict(self.__dict__)
        d["replicas"] = list(d["replicas"])
        return json.dumps(d, sort_keys=True)


@dataclass
class HurstEstimate:
    estimate: float
    se: float


def _as_ensemble(values) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.ndim != 2:
        raise ValueError("ensemble must be (replicas, times)")
    return v


def estimate_covariance(values, times=None) -> CovEstimate:
    """Sample covariance across replicas with leave-one-out jackknife SEs."""
    v = _as_ensemble(values)
    r, m = v.shape
    if r < 2:
        raise ValueError("need at least two replicas")
    times = np.arange(m, dtype=float) if times is None else np.asarray(times, dtype=float)
    mean = v.mean(axis=0)
    c = v - mean
    cov = c.T @ c / (r - 1)
    if not np.any(cov):
        return CovEstimate(times, cov, np.zeros_like(cov), r)
    # leave-one-out downdate, vectorized over the left-out replica
    total = v.sum(axis=0)
    s_mat = np.einsum("ri,rj->ij", v, v)
    mu_i = (total[None, :] - v) / (r - 1)             # (r, m)
    outer_x = np.einsum("ri,rj->rij", v, v)           # (r, m, m)
    outer_mu = np.einsum("ri,rj->rij", mu_i, mu_i)
    cov_loo = (s_mat[None] - outer_x - (r - 1) * outer_mu) / (r - 2)
    bar = cov_loo.mean(axis=0)
    se = np.sqrt((r - 1) / r * np.sum((cov_loo - bar) ** 2, axis=0))
    return CovEstimate(times, cov, se, r)


def normalize(values, times, *, reference_time: float = 1.0):
    """Divide every value by the MC standard deviation at the reference time."""
    v = _as_ensemble(values)
    times = np.asarray(times, dtype=float)
    hits = np.nonzero(np.isclose(times, reference_time))[0]
    if len(hits) != 1:
        raise ValueError(f"reference time {reference_time} must appear once in the grid")
    sd = v[:, hits[0]].std(ddof=1)
    if not sd > 0:
        raise ValueError("zero variance at the reference time")
    return v / sd


def hurst_from_variance(values, times, t_subset=None) -> HurstEstimate:
    """Half the least-squares slope of log Var over log t, with a delta-method
    SE that propagates the (cross-correlated) variance-of-variance estimates."""
    v = _as_ensemble(values)
    times = np.asarray(times, dtype=float)
    if t_subset is not None:
        idx = [int(np.nonzero(np.isclose(times, t))[0][0]) for t in t_subset]
        v = v[:, idx]
        times = times[idx]
    if len(times) < 3:
        raise ValueError("need at least three distinct times")
    if np.any(times <= 0):
        raise ValueError("times must be positive")
    r = v.shape[0]
    var = v.var(axis=0, ddof=1)
    if np.any(var <= 0):
        raise ValueError("nonpositive variance estimate; scaling regression undefined")
    x = np.log(times)
    x = x - x.mean()
    denom = float(x @ x)
    if denom == 0:
        raise ValueError("times must be distinct")
    slope = float(x @ np.log(var)) / denom
    c = v - v.mean(axis=0)
    dev = c**2 - var
    var_cov = dev.T @ dev / r / r          # Cov(hat var_i, hat var_j)
    y_cov = var_cov / np.outer(var, var)   # Cov(log hat var) by delta method
    d = x / denom
    se_slope = math.sqrt(float(d @ y_cov @ d))
    return HurstEstimate(slope / 2.0, se_slope / 2.0)


def correlation_with_se(values, times, s: float, t: float):
    """Normalized correlation between the columns at times s and t, with a
    leave-one-out jackknife standard error."""
    v = _as_ensemble(values)
    times = np.asarray(times, dtype=float)
    i = int(np.nonzero(np.isclose(times, s))[0][0])
    j = int(np.nonzero(np.isclose(times, t))[0][0])
    x, y = v[:, i], v[:, j]
    r = len(x)
    if r < 3:
        raise ValueError("need at least three replicas")

    def corr(xs, ys):
        xc, yc = xs - xs.mean(), ys - ys.mean()
        return float(xc @ yc / math.sqrt((xc @ xc) * (yc @ yc)))

    full = corr(x, y)
    loo = np.empty(r)
    sx, sy = x.sum(), y.sum()
    sxx, syy, sxy = x @ x, y @ y, x @ y
    for idx in range(r):
        n = r - 1
        mx = (sx - x[idx]) / n
        my = (sy - y[idx]) / n
        cxx = sxx - x[idx] ** 2 - n * mx * mx
        cyy = syy - y[idx] ** 2 - n * my * my
        cxy = sxy - x[idx] * y[idx] - n * mx * my
        loo[idx] = cxy / math.sqrt(cxx * cyy)
    se = math.sqrt((r - 1) / r * np.sum((loo - loo.mean()) ** 2))
    return full, se


def energy_distance(a, b) -> float:
    """V-statistic two-sample energy distance: 2 E|A-B| - E|A-A'| - E|B-B'|
    with diagonal terms kept, so identical multisets score exactly 0."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[0] == 1 and a.ndim == 2 and a.shape[1] > 1 and b.shape[0] == 1:
        a, b = a.T, b.T
    dab = _pdist(a, b).mean()
    daa = _pdist(a, a).mean()
    dbb = _pdist(b, b).mean()
    return float(2.0 * dab - daa - dbb)


def _pdist(x, y):
    return np.sqrt(((x[:, None, :] - y[None, :, :]) ** 2).sum(axis=2))


def energy_distance_test(
    sample_a,
    sample_b,
    permutations: int = 999,
    rng=None,
    *,
    seed: int = 0,
) -> TestReport:
    """Permutation test of equality in distribution on a shared t grid."""
    a = np.atleast_2d(np.asarray(sample_a, dtype=float))
    b = np.atleast_2d(np.asarray(sample_b, dtype=float))
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError("samples must be (n, m) over the same t grid")
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("samples must be nonempty")
    if rng is None:
        rng = derived_rng(seed, 0xE9E26)
    na, nb = a.shape[0], b.shape[0]
    pooled = np.vstack([a, b])
    dist = _pdist(pooled, pooled)
    idx_a = np.arange(na)
    idx_b = np.arange(na, na + nb)

    def stat(ia, ib):
        dab = dist[np.ix_(ia, ib)].mean()
        daa = dist[np.ix_(ia, ia)].mean()
        dbb = dist[np.ix_(ib, ib)].mean()
        return 2.0 * dab - daa - dbb

    observed = stat(idx_a, idx_b)
    count = 0
    labels = np.arange(na + nb)
    for _ in range(permutations):
        rng.shuffle(labels)
        if stat(labels[:na], labels[na:]) >= observed:
            count += 1
    p = (count + 1) / (permutations + 1)
    return TestReport(float(observed), float(p), (na, nb), permutations, seed)
