"""Wick products, pairing combinatorics, and Monte Carlo identity checks.

The combinatorial core is exact integer work: enumeration of partial
pairings of {1..k} and the signed subset count behind the cancellation of
non-normal pairings.  The Monte Carlo side verifies the Poisson/charge
identities the particle functionals rest on: the Mecke-Palm formula, the
permutation form of the second moment, and the second-moment reduction
relating the Wick tensor power of the occupation field to the k-fold
charged functional.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .particles import Window, sample_system
from .stable import StableParams, TimeGrid, sample_increments

__all__ = [
    "PairSet",
    "TensorTestFunction",
    "enumerate_pair_sets",
    "wick_product",
    "cancellation_identity",
    "CheckReport",
    "mecke_palm_check",
    "second_moment_permutation_check",
    "wick_vs_k_functional_check",
]


@dataclass(frozen=True)
class PairSet:
    """A set of disjoint unordered pairs over {1,...,k} (possibly empty)."""

    pairs: tuple

    def __post_init__(self):
        pairs = tuple(sorted(tuple(sorted(p)) for p in self.pairs))
        used = [i for p in pairs for i in p]
        if len(set(used)) != len(used):
            raise ValueError("pairs must be disjoint")
        if any(len(p) != 2 or p[0] == p[1] for p in pairs):
            raise ValueError("each pair must hold two distinct indices")
        object.__setattr__(self, "pairs", pairs)

    @property
    def covered(self) -> frozenset:
        return frozenset(i for p in self.pairs for i in p)

    def __len__(self):
        return len(self.pairs)


def enumerate_pair_sets(k: int) -> list:
    """All sets of disjoint unordered pairs of {1..k}, the empty set included.
    Count is sum_j C(k, 2j) (2j-1)!!."""
    if k < 1:
        raise ValueError("k must be >= 1")

    def rec(avail: tuple):
        if len(avail) < 2:
            yield ()
            return
        first, rest = avail[0], avail[1:]
        # pairings not covering `first`
        for tail in rec(rest):
            yield tail
        # pairings matching `first` with a later element
        for i, other in enumerate(rest):
            for tail in rec(rest[:i] + rest[i + 1 :]):
                yield ((first, other),) + tail

    return [PairSet(p) for p in rec(tuple(range(1, k + 1)))]


@dataclass(frozen=True)
class TensorTestFunction:
    """Sum of m elementary tensors, each a tuple of k one-dimensional factors."""

    terms: tuple  # tuple of tuples of callables

    def __post_init__(self):
        terms = tuple(tuple(t) for t in self.terms)
        if not terms:
            raise ValueError("need at least one term")
        k = len(terms[0])
        if any(len(t) != k for t in terms):
            raise ValueError("every term must have the same number of factors")
        object.__setattr__(self, "terms", terms)

    @property
    def order(self) -> int:
        return len(self.terms[0])

    @property
    def n_terms(self) -> int:
        return len(self.terms)


def wick_product(evals: np.ndarray, covs: np.ndarray) -> float:
    """Wick-centered tensor evaluation.

    evals[j, s] holds <X_T, phi^(s,j)> for one realization; covs[j, s, t]
    holds the (externally estimated) covariances E<X_T,phi^(s,j)><X_T,phi^(t,j)>.
    Returns sum_j sum_{A} (-1)^|A| prod_{(s,t) in A} covs[j,s,t]
    prod_{n not in A} evals[j,n] over all disjoint pair sets A.
    """
    evals = np.asarray(evals, dtype=float)
    if evals.ndim != 2:
        raise ValueError("evals must be (terms, k)")
    m, k = evals.shape
    covs = np.asarray(covs, dtype=float)
    if covs.shape != (m, k, k):
        raise ValueError(f"covs must have shape ({m}, {k}, {k})")
    if not np.all(np.isfinite(covs)):
        raise ValueError("missing covariance entries (non-finite values)")
    total = 0.0
    pair_sets = enumerate_pair_sets(k)
    for j in range(m):
        for ps in pair_sets:
            prod = (-1.0) ** len(ps)
            for s, t in ps.pairs:
                prod *= covs[j, s - 1, t - 1]
            for n in range(1, k + 1):
                if n not in ps.covered:
                    prod *= evals[j, n - 1]
            total += prod
    return float(total)


def cancellation_identity(n: int) -> int:
    """Signed number of times a fixed non-normal pairing (n pairs on each
    side) is produced across subset choices A of B and A' of B': explicit
    enumeration of all 4^n subset pairs with sign (-1)^(|A|+|A'|).  Must be 0."""
    if n < 1:
        raise ValueError("n must be >= 1")
    side = list(range(n))
    total = 0
    for a_size in range(n + 1):
        for a in itertools.combinations(side, a_size):
            for b_size in range(n + 1):
                for b in itertools.combinations(side, b_size):
                    total += (-1) ** (len(a) + len(b))
    return total


@dataclass
class CheckReport:
    """Two-sided Monte Carlo identity check with a z-score."""

    lhs: float
    rhs: float
    se: float
    z: float
    replicas: int
    seed: int

    def passed(self, z_max: float = 3.0) -> bool:
        return abs(self.z) <= z_max

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)


def _poisson_points(window: Window, rng) -> np.ndarray:
    n = int(rng.poisson(2.0 * window.half_width))
    return rng.uniform(-window.half_width, window.half_width, n)


def _distinct_tuple_sum(points: np.ndarray, F, k: int) -> float:
    n = len(points)
    if n < k:
        return 0.0
    if k == 1:
        return float(np.sum(F(points)))
    if k == 2:
        mat = F(points[:, None], points[None, :])
        return float(mat.sum() - np.trace(mat))
    total = 0.0
    for tup in itertools.permutations(range(n), k):
        total += float(F(*[points[i] for i in tup]))
    return total


def mecke_palm_check(F, window: Window, k: int, replicas: int, rng,
                     *, quad_rhs: float | None = None, seed: int = 0) -> CheckReport:
    """E sum_{j1 != ... != jk} F(x_j1,...,x_jk) against the k-fold intensity
    integral of F over the window (supplied or numerically integrated)."""
    if k not in (1, 2, 3):
        raise ValueError("k in {1,2,3} supported")
    if quad_rhs is None:
        from scipy.integrate import nquad

        L = window.half_width
        quad_rhs, _ = nquad(F, [(-L, L)] * k, opts={"limit": 200})
    draws = np.empty(replicas)
    for i in range(replicas):
        draws[i] = _distinct_tuple_sum(_poisson_points(window, rng), F, k)
    lhs = float(draws.mean())
    se = float(draws.std(ddof=1) / math.sqrt(replicas))
    z = (lhs - quad_rhs) / se if se > 0 else 0.0
    return CheckReport(lhs, float(quad_rhs), se, float(z), replicas, seed)


def second_moment_permutation_check(
    F, k: int, alpha: float, T: float, window: Window, replicas: int, rng,
    *, rhs_draws: int | None = None, seed: int = 0,
) -> CheckReport:
    """Permutation form of the charged second moment.

    F maps k positions (the particle locations at time T) to a real number.
    LHS: replicas of (sum over ordered distinct k-tuples of charge-weighted F)
    squared, on the truncated system.  RHS: Monte Carlo of the intensity
    integral of E sum_pi F(x + xi) F(x_pi + xi_pi) with uniform window
    sampling (volume-weighted).
    """
    if k not in (1, 2):
        raise ValueError("k in {1,2} supported")
    params = StableParams(alpha)
    params.require_transient()
    L = window.half_width

    lhs_draws = np.empty(replicas)
    for i in range(replicas):
        pts = _poisson_points(window, rng)
        sig = rng.integers(0, 2, len(pts)) * 2 - 1
        pos = pts + sample_increments(params, T, len(pts), rng)
        if k == 1:
            s = float(np.sum(sig * F(pos)))
        else:
            mat = F(pos[:, None], pos[None, :]) * np.outer(sig, sig)
            s = float(mat.sum() - np.trace(mat))
        lhs_draws[i] = s * s
    lhs = float(lhs_draws.mean())
    lhs_se = float(lhs_draws.std(ddof=1) / math.sqrt(replicas))

    nr = rhs_draws if rhs_draws is not None else 5 * replicas
    vol = (2.0 * L) ** k
    rhs_vals = np.empty(nr)
    perms = list(itertools.permutations(range(k)))
    for i in range(nr):
        x = rng.uniform(-L, L, k)
        pos = x + sample_increments(params, T, k, rng)
        base = float(F(*pos)) if k > 1 else float(F(pos[0]))
        tot = 0.0
        for pi in perms:
            permuted = pos[list(pi)]
            tot += base * (float(F(*permuted)) if k > 1 else float(F(permuted[0])))
        rhs_vals[i] = vol * tot
    rhs = float(rhs_vals.mean())
    rhs_se = float(rhs_vals.std(ddof=1) / math.sqrt(nr))

    se = math.hypot(lhs_se, rhs_se)
    z = (lhs - rhs) / se if se > 0 else 0.0
    return CheckReport(lhs, rhs, se, float(z), replicas, seed)


def _time_integrals(system, phi_list, T):
    """I[j, i] = step * sum_s phi_i(position_j(s)) over the left rule."""
    m = system.grid.index_of(T)
    pos = system.positions[:, :m]
    out = np.empty((system.size, len(phi_list)))
    for i, phi in enumerate(phi_list):
        out[:, i] = np.asarray(phi(pos), dtype=float).sum(axis=1) * system.grid.step
    return out


def _distinct_product_sum(a: np.ndarray) -> float:
    """sum over ordered tuples of distinct indices of prod_i a[i, j_i],
    columns of a being the k factor vectors (k <= 3)."""
    k = a.shape[1]
    cols = [a[:, i] for i in range(k)]
    if k == 1:
        return float(cols[0].sum())
    if k == 2:
        return float(cols[0].sum() * cols[1].sum() - (cols[0] * cols[1]).sum())
    if k == 3:
        p = [c.sum() for c in cols]
        p01 = (cols[0] * cols[1]).sum()
        p02 = (cols[0] * cols[2]).sum()
        p12 = (cols[1] * cols[2]).sum()
        p012 = (cols[0] * cols[1] * cols[2]).sum()
        return float(p[0] * p[1] * p[2] - p01 * p[2] - p02 * p[1] - p12 * p[0] + 2.0 * p012)
    raise ValueError("k <= 3 supported")


def wick_vs_k_functional_check(
    phi: TensorTestFunction,
    alpha: float,
    T: float,
    step: float,
    window: Window,
    replicas: int,
    rng,
    *,
    calibration_factor: int = 10,
    seed: int = 0,
) -> dict:
    """Second-moment reduction: E(W - rho)^2 = E W^2 - E rho^2, with
    W = <:X_T x ... x X_T:, Phi> and rho the k-fold charged functional.

    The Wick centering covariances are estimated on a disjoint calibration
    batch (calibration_factor x replicas).  The identity is asserted through
    the per-replica statistic W*rho - rho^2, which has mean exactly zero
    under the identity regardless of calibration error (that error multiplies
    E[rho] = 0).  Returns the three moments, the paired z, and sizes.
    """
    if phi.order not in (2, 3):
        raise ValueError("orders k in {2,3} supported")
    k = phi.order
    grid = TimeGrid.from_step(T, step)
    flat = [f for term in phi.terms for f in term]

    def one_batch(count, stream):
        evals = np.empty((count, phi.n_terms, k))
        rhos = np.empty(count)
        for i in range(count):
            system = sample_system(alpha, window, grid, stream)
            I = _time_integrals(system, flat, T)  # (N, m*k)
            sqT = math.sqrt(T)
            rho_i = 0.0
            for j in range(phi.n_terms):
                block = I[:, j * k : (j + 1) * k]
                evals[i, j] = system.charges @ block / sqT
                rho_i += _distinct_product_sum(block * system.charges[:, None])
            rhos[i] = rho_i / T ** (k / 2.0)
        return evals, rhos

    calib_evals, _ = one_batch(calibration_factor * replicas, rng)
    covs = np.einsum("ijs,ijt->jst", calib_evals, calib_evals) / len(calib_evals)

    evals, rhos = one_batch(replicas, rng)
    wick_vals = np.array([wick_product(evals[i], covs) for i in range(replicas)])

    paired = wick_vals * rhos - rhos**2
    se = float(paired.std(ddof=1) / math.sqrt(replicas))
    z = float(paired.mean() / se) if se > 0 else 0.0
    diff_sq = float(np.mean((wick_vals - rhos) ** 2))
    return {
        "E_diff_sq": diff_sq,
        "E_wick_sq": float(np.mean(wick_vals**2)),
        "E_rho_sq": float(np.mean(rhos**2)),
        "paired_mean": float(paired.mean()),
        "paired_se": se,
        "z": z,
        "replicas": replicas,
        "calibration": calibration_factor * replicas,
        "seed": seed,
    }
