"""The charged particle functionals.

Two families are built here, both aggregated over a sampled particle system:

* the pair Riesz functional (charge products times a double time integral of
  phi against the kernel |.|^(gamma-1) or its mollified/truncated stand-in),
  whose distributions approach the non-symmetric Rosenblatt process, and
* the k-fold intersection functional (charge products times mollified
  k-intersection local times), whose distributions approach the k-Hermite
  process with H = 1 - (1-alpha)k/2.

Every production path has an exact reference twin: `method="direct"` loops
the definition over ordered particle tuples, `method="binned"`/"factorized"
are the fast engines, and the tests pin the two against each other.

Conventions shared by every time integral: left Riemann rule on the path
grid (indices i*step < T), ordered tuples of distinct particle indices, and
below one spatial resolution unit r0 = step**(1/alpha) the raw kernel is
frozen at its value at r0.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve

from .kernels import (
    Mollifier,
    RieszKernel,
    RieszSmoothedTable,
    SmoothedIndicator,
    StepFunction,
    mollifier_eval,
)
from .particles import ParticleSystem, Window, sample_system, window_for
from .stable import StablePath, TimeGrid

__all__ = [
    "PairRieszConfig",
    "KIntersectionConfig",
    "FunctionalSample",
    "pair_riesz_integral",
    "sample_pair_riesz",
    "pair_riesz_values",
    "approx_intersection_local_time",
    "sample_k_intersection",
    "k_intersection_values",
    "resolution_unit",
    "indicator_family",
]


def resolution_unit(alpha: float, step: float) -> float:
    """Displacement scale of one time step; path features below it are not
    resolved by the discretization."""
    return step ** (1.0 / alpha)


def _digest(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha1(blob).hexdigest()[:12]


@dataclass(frozen=True)
class PairRieszConfig:
    """Parameters of the pair functional run (one replica = one system)."""

    alpha: float
    beta: float
    T: float
    t_grid: tuple
    step: float
    eps: float = 0.0    # 0 disables mollification (raw kernel)
    delta: float = 0.0  # 0 disables the Riesz truncation
    kappa: float = 0.0  # 0 evaluates the raw indicator, else psi_kappa
    window_q: float = 0.75
    window_L: float = 0.0  # explicit half-width override when > 0
    profile: str = "bump"

    def __post_init__(self):
        if not (0.0 < self.alpha < self.beta < 1.0):
            raise ValueError("need 0 < alpha < beta < 1")
        if not (self.alpha + self.beta > 1.0):
            raise ValueError("need alpha + beta > 1")
        if not (self.T > 0 and self.step > 0):
            raise ValueError("T and step must be positive")
        object.__setattr__(self, "t_grid", tuple(float(t) for t in self.t_grid))
        if not self.t_grid or any(t <= 0 for t in self.t_grid):
            raise ValueError("t_grid must hold positive times")

    @property
    def gamma(self) -> float:
        return 0.5 * (self.beta - self.alpha)

    @property
    def hurst(self) -> float:
        return 0.5 * (self.alpha + self.beta)

    def window(self) -> Window:
        if self.window_L > 0:
            return Window(self.window_L)
        pad = self.kappa + (self.eps if self.eps else 0.0)
        return window_for(max(self.t_grid) + pad, self.T, self.alpha, self.window_q)

    def time_grid(self) -> TimeGrid:
        return TimeGrid.from_step(self.T, self.step)

    def digest(self) -> str:
        return _digest(["pair-riesz", self.__dict__])


@dataclass(frozen=True)
class KIntersectionConfig:
    """Parameters of the k-intersection functional run."""

    k: int
    alpha: float
    T: float
    t_grid: tuple
    step: float
    eps: float
    kappa: float = 0.0
    window_q: float = 0.75
    window_L: float = 0.0
    profile: str = "bump"

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("order k must be >= 2")
        if not (1.0 - 1.0 / self.k < self.alpha < 1.0):
            raise ValueError(f"alpha must be in (1 - 1/k, 1) = ({1-1/self.k:.4f}, 1)")
        if not (self.T > 0 and self.step > 0 and self.eps > 0):
            raise ValueError("T, step and eps must be positive")
        object.__setattr__(self, "t_grid", tuple(float(t) for t in self.t_grid))
        if not self.t_grid or any(t <= 0 for t in self.t_grid):
            raise ValueError("t_grid must hold positive times")

    @property
    def hurst(self) -> float:
        return 1.0 - (1.0 - self.alpha) * self.k / 2.0

    def window(self) -> Window:
        if self.window_L > 0:
            return Window(self.window_L)
        return window_for(max(self.t_grid) + self.kappa + self.eps,
                          self.T, self.alpha, self.window_q)

    def time_grid(self) -> TimeGrid:
        return TimeGrid.from_step(self.T, self.step)

    def digest(self) -> str:
        return _digest(["k-intersection", self.__dict__])


@dataclass
class FunctionalSample:
    """One replica's functional values on the config's t grid."""

    values: np.ndarray
    replica_id: int
    config_digest: str
    degenerate: bool = False  # e.g. fewer particles than the order k

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("functional values must be finite")


def indicator_family(t_grid, kappa: float, profile: str = "bump"):
    """phi_t for each t: the raw indicator of [0, t) or its kappa-smoothing."""
    if kappa == 0.0:
        return [StepFunction.indicator(t) for t in t_grid]
    g = Mollifier(profile)
    return [SmoothedIndicator(StepFunction.indicator(t), g, kappa) for t in t_grid]


# ---------------------------------------------------------------------------
# kernels for the pair functional

@lru_cache(maxsize=8)
def _kernel_table(gamma: float, delta: float, eps: float, profile: str) -> RieszSmoothedTable:
    return RieszSmoothedTable(RieszKernel(gamma, delta), Mollifier(profile), eps)


def _raw_kernel(z: np.ndarray, gamma: float, delta: float, resolution: float) -> np.ndarray:
    z = np.abs(np.asarray(z, dtype=float))
    if delta > 0.0:
        out = np.zeros_like(z)
        mask = (z > delta) & (z < 1.0 / delta)
        out[mask] = z[mask] ** (gamma - 1.0)
        return out
    if resolution > 0.0:
        z = np.maximum(z, resolution)
        return z ** (gamma - 1.0)
    out = np.full_like(z, np.inf)
    mask = z > 0
    out[mask] = z[mask] ** (gamma - 1.0)
    return out


def _kernel_fn(gamma, eps, delta, profile, resolution):
    if eps > 0.0:
        table = _kernel_table(gamma, delta, eps, profile)
        return lambda z: table(z)
    return lambda z: _raw_kernel(z, gamma, delta, resolution)


def _positions_of(path, length=None) -> np.ndarray:
    if isinstance(path, StablePath):
        return path.values if length is None else path.values[:length]
    arr = np.asarray(path, dtype=float)
    return arr if length is None else arr[:length]


def pair_riesz_integral(
    path_a,
    path_b,
    phi,
    gamma: float,
    T: float,
    *,
    step: float | None = None,
    eps: float = 0.0,
    delta: float = 0.0,
    profile: str = "bump",
    resolution: float | None = None,
) -> float:
    """Double Riemann sum of phi(a_r) K(b_s - a_r) over [0,T]^2 (asymmetric in
    the two trajectories: phi rides on the first)."""
    if not (0.0 < gamma < 0.5):
        raise ValueError(f"gamma must be in (0, 1/2), got {gamma}")
    if isinstance(path_a, StablePath):
        if step is None:
            step = path_a.grid.step
        if resolution is None:
            resolution = resolution_unit(path_a.params.alpha, step)
    if step is None:
        raise ValueError("step is required when positions are plain arrays")
    if resolution is None:
        resolution = 0.0
    m = int(round(T / step))
    a = _positions_of(path_a)
    b = _positions_of(path_b)
    if len(a) != len(b):
        raise ValueError("trajectories must share the grid")
    if m > len(a):
        raise ValueError(f"T={T} exceeds the simulated horizon")
    a, b = a[:m], b[:m]
    if m == 0:
        return 0.0
    K = _kernel_fn(gamma, eps, delta, profile, resolution)
    w = np.asarray(phi(a), dtype=float)
    if not np.any(w):
        return 0.0
    kmat = K(b[None, :] - a[:, None])
    return float(step * step * (w @ kmat).sum())


# ---------------------------------------------------------------------------
# pair functional over a system

def pair_riesz_values(system: ParticleSystem, cfg: PairRieszConfig, *, method: str = "binned") -> np.ndarray:
    if method == "direct":
        return _pair_riesz_direct(system, cfg)
    if method == "binned":
        return _pair_riesz_binned(system, cfg)
    raise ValueError(f"unknown method {method!r}")


def _pair_riesz_direct(system: ParticleSystem, cfg: PairRieszConfig) -> np.ndarray:
    """Literal ordered-pair sum of pair_riesz_integral; O(N^2 n^2)."""
    m = system.grid.index_of(cfg.T)
    pos = system.positions
    sig = system.charges
    phis = indicator_family(cfg.t_grid, cfg.kappa, cfg.profile)
    res = resolution_unit(cfg.alpha, cfg.step)
    out = np.zeros(len(cfg.t_grid))
    n = system.size
    for it, phi in enumerate(phis):
        acc = 0.0
        for j in range(n):
            for k in range(n):
                if j == k:
                    continue
                acc += sig[j] * sig[k] * pair_riesz_integral(
                    pos[j], pos[k], phi, cfg.gamma, cfg.T,
                    step=cfg.step, eps=cfg.eps, delta=cfg.delta,
                    profile=cfg.profile, resolution=res,
                )
        out[it] = acc / cfg.T
    return out


def _pair_riesz_binned(system: ParticleSystem, cfg: PairRieszConfig) -> np.ndarray:
    """FFT-binned evaluation: bin every charge-weighted path sample onto cells,
    convolve once with the kernel, read the field off at the phi-weighted
    samples, and subtract the j = k diagonal with the same binned kernel."""
    m = system.grid.index_of(cfg.T)
    step = cfg.step
    n = system.size
    phis = indicator_family(cfg.t_grid, cfg.kappa, cfg.profile)
    out = np.zeros(len(cfg.t_grid))
    if n < 2 or m == 0:
        return out

    res = resolution_unit(cfg.alpha, step)
    w = cfg.eps / 4.0 if cfg.eps > 0 else res / 2.0
    pos = system.positions[:, :m]

    # field samples: clip far wanderers, their kernel weight is negligible
    L = system.window.half_width
    sup_hi = max(cfg.t_grid) + cfg.kappa
    sup_lo = -cfg.kappa
    r_field = 2.0 * L + sup_hi + 1.0
    keep = np.abs(pos) <= r_field
    cells = np.round(pos / w).astype(np.int64)

    flat_keep = keep.ravel()
    cell_flat = cells.ravel()[flat_keep]
    charge_flat = np.repeat(system.charges, m)[flat_keep]
    cmin = int(cell_flat.min())
    cmax = int(cell_flat.max())
    span = cmax - cmin + 1
    hist = np.bincount(cell_flat - cmin, weights=charge_flat, minlength=span)

    # kernel vector over every representable cell difference
    K = _kernel_fn(cfg.gamma, cfg.eps, cfg.delta, cfg.profile, res)
    if cfg.eps > 0 and cfg.delta > 0:
        dmax = min(span - 1, int(math.ceil((1.0 / cfg.delta + cfg.eps) / w)) + 1)
    else:
        dmax = span - 1
    diffs = np.arange(-dmax, dmax + 1)
    kvec = K(diffs * w)

    # G[c] = sum_{c'} hist[c'] kvec[c - c']  for c in [cmin, cmax]
    conv = fftconvolve(hist, kvec)  # index i <-> difference (i - dmax) + cmin
    G = conv[dmax : dmax + span]

    # phi-side samples (exact positions, only the support region)
    sel = (pos >= sup_lo) & (pos < sup_hi)
    j_idx, s_idx = np.nonzero(sel)
    if len(j_idx) == 0:
        return out
    x_sel = pos[j_idx, s_idx]
    c_sel = cells[j_idx, s_idx]
    sig_sel = system.charges[j_idx].astype(float)
    field_sel = G[np.clip(c_sel - cmin, 0, span - 1)]

    # diagonal j = k correction, same binned kernel
    self_field = np.zeros(len(j_idx))
    for j in np.unique(j_idx):
        rows = np.nonzero(j_idx == j)[0]
        own = cells[j][keep[j]]
        d = c_sel[rows][:, None] - own[None, :]
        np.clip(d, -dmax, dmax, out=d)
        self_field[rows] = kvec[d + dmax].sum(axis=1)

    # the j = k term enters the full sum with sigma_j^2 = 1
    contrib = sig_sel * field_sel - self_field
    for it, phi in enumerate(phis):
        wts = np.asarray(phi(x_sel), dtype=float)
        out[it] = step * step / cfg.T * float(wts @ contrib)
    return out


def sample_pair_riesz(cfg: PairRieszConfig, rng, *, replica_id: int = 0,
                      method: str = "binned") -> FunctionalSample:
    """Sample one particle system and evaluate the pair functional on t_grid."""
    system = sample_system(cfg.alpha, cfg.window(), cfg.time_grid(), rng)
    values = pair_riesz_values(system, cfg, method=method)
    degenerate = system.size < 2
    return FunctionalSample(values, replica_id, cfg.digest(), degenerate)


# ---------------------------------------------------------------------------
# k-intersection local time

def approx_intersection_local_time(
    paths,
    phi,
    mollifier: Mollifier,
    eps: float,
    T: float,
    *,
    step: float | None = None,
    alpha: float | None = None,
) -> float:
    """Mollified k-intersection local time of the given trajectories:
    the k-fold Riemann sum of phi(p1_r) prod_i f_eps(pi_s - p1_r), computed in
    the factorized O(k n^2) form (inner sums over s_2..s_k factorize)."""
    k = len(paths)
    if k < 2:
        raise ValueError("need at least two trajectories")
    if isinstance(paths[0], StablePath):
        if step is None:
            step = paths[0].grid.step
        if alpha is None:
            alpha = paths[0].params.alpha
    if step is None:
        raise ValueError("step is required when positions are plain arrays")
    if alpha is not None and not (1.0 - 1.0 / k < alpha < 1.0):
        raise ValueError(f"alpha must be in (1 - 1/k, 1) for k = {k}")
    m = int(round(T / step))
    if m == 0:
        return 0.0
    xs = [_positions_of(p)[:m] for p in paths]
    if any(len(x) != m for x in xs):
        raise ValueError("T exceeds a trajectory's horizon")
    base = np.asarray(phi(xs[0]), dtype=float)
    if not np.any(base):
        return 0.0
    acc = base.copy()
    for x in xs[1:]:
        fe = mollifier_eval(mollifier, eps, x[None, :] - xs[0][:, None])
        acc *= step * fe.sum(axis=1)
    return float(step * acc.sum())


def k_intersection_values(system: ParticleSystem, cfg: KIntersectionConfig,
                          *, method: str = "factorized"):
    if method == "direct":
        return _k_intersection_direct(system, cfg)
    if method == "factorized":
        return _k_intersection_factorized(system, cfg)
    raise ValueError(f"unknown method {method!r}")


def _ordered_tuples(n: int, k: int):
    import itertools

    return itertools.permutations(range(n), k)


def _k_intersection_direct(system: ParticleSystem, cfg: KIntersectionConfig) -> np.ndarray:
    """Literal ordered-tuple sum of approx_intersection_local_time; tiny
    systems only (O(N^k) tuples)."""
    pos = system.positions
    sig = system.charges
    phis = indicator_family(cfg.t_grid, cfg.kappa, cfg.profile)
    mol = Mollifier(cfg.profile)
    out = np.zeros(len(cfg.t_grid))
    norm = cfg.T ** (cfg.k / 2.0)
    for it, phi in enumerate(phis):
        acc = 0.0
        for tup in _ordered_tuples(system.size, cfg.k):
            charge = np.prod(sig[list(tup)])
            acc += charge * approx_intersection_local_time(
                [pos[j] for j in tup], phi, mol, cfg.eps, cfg.T,
                step=cfg.step, alpha=cfg.alpha,
            )
        out[it] = acc / norm
    return out


def _k_intersection_factorized(system: ParticleSystem, cfg: KIntersectionConfig) -> np.ndarray:
    """Exact factorized evaluation.

    For an evaluation sample x owned by particle j1, the sum over ordered
    (k-1)-tuples of distinct other particles of prod sigma_j S_j(x), with
    S_j(x) = step * sum_s f_eps(pos_j(s) - x), is (k-1)! e_{k-1} of the
    charge-signed S values excluding j1 -- Newton's identities give it from
    power sums, exactly, for k <= 4.
    """
    k = cfg.k
    if k > 4:
        raise NotImplementedError("factorized path covers k <= 4; use method='direct'")
    m = system.grid.index_of(cfg.T)
    out = np.zeros(len(cfg.t_grid))
    if system.size < k or m == 0:
        return out
    step = cfg.step
    eps = cfg.eps
    mol = Mollifier(cfg.profile)
    pos = system.positions[:, :m]
    sig = system.charges.astype(float)

    sup_lo = -cfg.kappa
    sup_hi = max(cfg.t_grid) + cfg.kappa

    # evaluation samples: any path sample inside the widest phi support
    evj, evs = np.nonzero((pos >= sup_lo) & (pos < sup_hi))
    if len(evj) == 0:
        return out
    ex = pos[evj, evs]

    # neighbour samples: anything within eps of the support
    nbj, nbs = np.nonzero((pos > sup_lo - eps) & (pos < sup_hi + eps))
    npos = pos[nbj, nbs]
    order = np.argsort(npos, kind="stable")
    npos_s = npos[order]
    nid_s = nbj[order]

    eorder = np.argsort(ex, kind="stable")
    lo = np.searchsorted(npos_s, ex[eorder] - eps, side="left")
    hi = np.searchsorted(npos_s, ex[eorder] + eps, side="right")
    counts = hi - lo
    # expand (eval, neighbour) index pairs for all windows at once
    tot = int(counts.sum())
    e_sorted_rep = np.repeat(eorder, counts)
    offs = np.concatenate([[0], np.cumsum(counts)])[:-1]
    idx_in_win = np.arange(tot) - np.repeat(offs, counts)
    n_take = np.repeat(lo, counts) + idx_in_win
    pid = nid_s[n_take]
    fe = mollifier_eval(mol, eps, npos_s[n_take] - ex[e_sorted_rep])

    # group by (eval sample, particle): S = step * sum fe
    key = e_sorted_rep.astype(np.int64) * (system.size + 1) + pid
    ukey, inv = np.unique(key, return_inverse=True)
    S = np.bincount(inv, weights=fe) * step
    g_e = (ukey // (system.size + 1)).astype(np.intp)
    g_p = (ukey % (system.size + 1)).astype(np.intp)
    a = sig[g_p] * S

    ne = len(ex)
    p1 = np.bincount(g_e, weights=a, minlength=ne)
    own = g_p == evj[g_e]
    a_self = np.zeros(ne)
    a_self[g_e[own]] = a[own]
    if k == 2:
        D = p1 - a_self
    else:
        p2 = np.bincount(g_e, weights=a * a, minlength=ne)
        q1 = p1 - a_self
        q2 = p2 - a_self * a_self
        if k == 3:
            D = q1 * q1 - q2
        else:
            p3 = np.bincount(g_e, weights=a * a * a, minlength=ne)
            q3 = p3 - a_self**3
            D = q1**3 - 3.0 * q1 * q2 + 2.0 * q3

    phis = indicator_family(cfg.t_grid, cfg.kappa, cfg.profile)
    base = sig[evj] * D
    norm = step / cfg.T ** (k / 2.0)
    for it, phi in enumerate(phis):
        wts = np.asarray(phi(ex), dtype=float)
        out[it] = norm * float(wts @ base)
    return out


def sample_k_intersection(cfg: KIntersectionConfig, rng, *, replica_id: int = 0,
                          method: str = "factorized") -> FunctionalSample:
    """Sample one particle system and evaluate the k-intersection functional."""
    system = sample_system(cfg.alpha, cfg.window(), cfg.time_grid(), rng)
    if system.size < cfg.k:
        return FunctionalSample(np.zeros(len(cfg.t_grid)), replica_id, cfg.digest(), True)
    values = k_intersection_values(system, cfg, method=method)
    return FunctionalSample(values, replica_id, cfg.digest(), False)
