"""Independent generators of the limit processes.

Three routes that never touch the particle machinery, used to cross-check it:

* exact fractional Brownian motion (Cholesky of the target covariance),
* partial sums of Hermite polynomials of a long-range-dependent Gaussian
  sequence (the classical non-central-limit-theorem construction), and
* a frequency-domain sampler that discretizes the multiple Wiener integral
  against a conjugate-symmetric complex Gaussian measure, with the diagonal
  excluded (supports per-coordinate exponents, so both the symmetric
  k-Hermite and the non-symmetric Rosenblatt kernels are covered).

All oracle output is compared after normalizing by the Monte Carlo standard
deviation at t = 1, because the limit theorems identify laws only up to a
multiplicative constant.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, toeplitz

__all__ = [
    "OracleConfig",
    "SpectralGrid",
    "target_covariance",
    "fbm_sample",
    "hermite_polynomial",
    "lrd_gaussian_sequence",
    "hermite_partial_sum",
    "spectral_hermite_sample",
]

_CHOL_LIMIT = 4096
_cache_lock = threading.Lock()
_fbm_cache: dict = {}
_lrd_cache: dict = {}


@dataclass(frozen=True)
class OracleConfig:
    """Partial-sum generator parameters; d is the kernel exponent tied to the
    Hurst coefficient by H = k d - k/2 + 1."""

    k: int
    hurst: float
    n: int
    t_grid: tuple

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("order k must be >= 1")
        if not (0.5 < self.hurst < 1.0):
            raise ValueError(f"hurst must be in (1/2, 1), got {self.hurst}")
        if self.n < 1:
            raise ValueError("n must be positive")
        object.__setattr__(self, "t_grid", tuple(float(t) for t in self.t_grid))
        if not self.t_grid or any(t < 0 for t in self.t_grid):
            raise ValueError("t_grid must hold nonnegative times")

    @property
    def d(self) -> float:
        return (self.hurst - 1.0) / self.k + 0.5

    @property
    def sequence_length(self) -> int:
        return int(math.ceil(self.n * max(self.t_grid)))


@dataclass(frozen=True)
class SpectralGrid:
    """Conjugate-symmetric frequency bins (m dw, (m+1) dw], m = 0..M-1, plus
    their mirrors; no bin touches 0 in its interior and mirrored bins carry
    conjugate weights."""

    omega_max: float
    delta_omega: float

    def __post_init__(self):
        if not (self.omega_max > 0 and self.delta_omega > 0):
            raise ValueError("omega_max and delta_omega must be positive")
        if self.n_positive < 1:
            raise ValueError("grid must contain at least one bin")

    @property
    def n_positive(self) -> int:
        return int(round(self.omega_max / self.delta_omega))

    def midpoints(self) -> np.ndarray:
        """All bin midpoints, positives then mirrored negatives."""
        pos = (np.arange(self.n_positive) + 0.5) * self.delta_omega
        return np.concatenate([pos, -pos])

    def bin_mass(self, exponent: float) -> np.ndarray:
        """Exact mass int_bin |u|^-exponent du per bin (same for a mirror)."""
        if not (0.0 < exponent < 1.0):
            raise ValueError("spectral exponent must be in (0,1)")
        edges = np.arange(self.n_positive + 1) * self.delta_omega
        p = 1.0 - exponent
        mass = (edges[1:] ** p - edges[:-1] ** p) / p
        return np.concatenate([mass, mass])


def target_covariance(H: float, s: float, t: float) -> float:
    """R(s,t) = (s^2H + t^2H - |s-t|^2H)/2, shared by every k-Hermite process."""
    if not (0.0 < H < 1.0):
        raise ValueError(f"H must be in (0,1), got {H}")
    if s < 0 or t < 0:
        raise ValueError("times must be nonnegative")
    return 0.5 * (s ** (2 * H) + t ** (2 * H) - abs(s - t) ** (2 * H))


def _fbm_factor(H: float, times: tuple) -> np.ndarray:
    key = (H, times)
    with _cache_lock:
        if key not in _fbm_cache:
            ts = np.asarray(times)
            cov = np.array([[target_covariance(H, s, t) for t in ts] for s in ts])
            try:
                _fbm_cache[key] = cholesky(cov, lower=True)
            except np.linalg.LinAlgError as exc:  # pragma: no cover
                raise RuntimeError(
                    f"covariance not numerically PD for H={H}, grid={times}: {exc}"
                )
        return _fbm_cache[key]


def fbm_sample(H: float, t_grid, rng: np.random.Generator) -> np.ndarray:
    """Exact fBm values on t_grid (Cholesky; factor cached per (H, grid))."""
    times = tuple(float(t) for t in t_grid)
    if len(times) > _CHOL_LIMIT:
        raise ValueError(f"grid too large for Cholesky path (> {_CHOL_LIMIT})")
    if any(t < 0 for t in times):
        raise ValueError("times must be nonnegative")
    pos = tuple(t for t in times if t > 0)
    z = rng.standard_normal(len(pos))
    vals = _fbm_factor(H, pos) @ z if pos else np.zeros(0)
    out = np.zeros(len(times))
    j = 0
    for i, t in enumerate(times):
        if t > 0:
            out[i] = vals[j]
            j += 1
    return out


def hermite_polynomial(j: int, x):
    """Probabilists' Hermite polynomial H_j via the three-term recurrence."""
    if j < 0:
        raise ValueError("order must be >= 0")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if j == 0:
        return h_prev
    h = x.copy()
    for m in range(1, j):
        h, h_prev = x * h - m * h_prev, h
    return h


def _lrd_correlations(H: float, k: int, n: int) -> np.ndarray:
    # r(m) = (1+m)^((2H-2)/k): unit at lag 0, the target power law at large
    # lags, and convex decreasing (Polya), hence a valid correlation; the
    # unshifted power law would force r(1) = 1, a degenerate sequence
    lags = np.arange(n, dtype=float)
    return (1.0 + lags) ** ((2.0 * H - 2.0) / k)


def _lrd_factor(H: float, k: int, n: int) -> np.ndarray:
    key = (H, k, n)
    with _cache_lock:
        if key not in _lrd_cache:
            r = _lrd_correlations(H, k, n)
            mat = toeplitz(r)
            try:
                L = cholesky(mat, lower=True)
            except np.linalg.LinAlgError:
                # nearest-PD projection; only tolerated for tiny perturbations
                w, V = np.linalg.eigh(mat)
                pert = max(0.0, -float(w.min()))
                if pert >= 1e-8:
                    raise ValueError(
                        f"correlation r(m)=m^((2H-2)/k) not PD at n={n} "
                        f"(eigenvalue deficit {pert:.2e} exceeds 1e-8)"
                    )
                w = np.clip(w, 1e-14, None)
                L = cholesky(V @ np.diag(w) @ V.T, lower=True)
            _lrd_cache[key] = L
        return _lrd_cache[key]


def lrd_gaussian_sequence(
    H: float, k: int, n: int, rng: np.random.Generator, *, method: str = "auto"
) -> np.ndarray:
    """Stationary centered unit-variance Gaussian sequence with correlation
    r(m) = (1+m)**((2H-2)/k) (the long-range power law, shifted to be a valid
    correlation; r(0) = 1).  Cholesky for n <= 4096, circulant embedding
    (Davies-Harte) beyond; the embedding raises if its eigenvalues go
    negative, advising the Cholesky path."""
    if not (0.5 < H < 1.0):
        raise ValueError(f"H must be in (1/2, 1), got {H}")
    if k < 1 or n < 1:
        raise ValueError("k and n must be positive")
    if method == "auto":
        method = "cholesky" if n <= _CHOL_LIMIT else "circulant"
    if method == "cholesky":
        if n > _CHOL_LIMIT:
            raise ValueError(f"Cholesky path limited to n <= {_CHOL_LIMIT}")
        return _lrd_factor(H, k, n) @ rng.standard_normal(n)
    if method != "circulant":
        raise ValueError(f"unknown method {method!r}")
    r = _lrd_correlations(H, k, n + 1)
    circ = np.concatenate([r, r[-2:0:-1]])  # length 2n
    eig = np.fft.fft(circ).real
    if eig.min() < -1e-10 * eig.max():
        raise ValueError(
            f"circulant embedding failed (min eigenvalue {eig.min():.3e}); "
            "use the Cholesky path (n <= 4096)"
        )
    eig = np.clip(eig, 0.0, None)
    m = len(circ)
    z = np.empty(m, dtype=complex)
    z[0] = rng.standard_normal()
    z[n] = rng.standard_normal()
    re = rng.standard_normal(n - 1)
    im = rng.standard_normal(n - 1)
    z[1:n] = (re + 1j * im) / math.sqrt(2.0)
    z[n + 1 :] = np.conj(z[1:n][::-1])
    x = np.fft.ifft(np.sqrt(eig) * z) * math.sqrt(m)
    return x.real[:n]


def hermite_partial_sum(config: OracleConfig, rng: np.random.Generator) -> np.ndarray:
    """n^-H-normalized partial sums of H_k over the LRD sequence, read off at
    floor(n t) for each t in the grid."""
    length = config.sequence_length
    method = "cholesky" if length <= _CHOL_LIMIT else "circulant"
    xi = lrd_gaussian_sequence(config.hurst, config.k, length, rng, method=method)
    g = hermite_polynomial(config.k, xi)
    csum = np.concatenate([[0.0], np.cumsum(g)])
    idx = np.minimum(np.floor(config.n * np.asarray(config.t_grid)).astype(int), length)
    return csum[idx] / config.n**config.hurst


def spectral_hermite_sample(
    k: int,
    exponents,
    t_grid,
    spectral_grid: SpectralGrid,
    rng: np.random.Generator,
    *,
    return_residual: bool = False,
):
    """Frequency-domain sample of the order-k limit process.

    Draws one conjugate-symmetric complex Gaussian white measure on the bins,
    weights coordinate i by the exact bin mass of |u|^-exponents[i], and sums
    the kernel (exp(i(u_1+...+u_k)t) - 1)/(i(u_1+...+u_k)) over off-diagonal
    bin tuples (no two slots may share a bin or a mirrored pair).  The
    symmetric k-Hermite case uses equal exponents 2d = 2(H-1)/k + 1; the
    non-symmetric Rosenblatt kernel uses (alpha, beta).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > 3:
        raise ValueError("spectral sampler supports k <= 3 (cost)")
    exponents = [float(a) for a in (exponents if np.iterable(exponents) else [exponents])]
    if len(exponents) != k:
        raise ValueError(f"need {k} spectral exponents, got {len(exponents)}")
    ts = np.asarray([float(t) for t in t_grid])
    mids = spectral_grid.midpoints()
    nb = len(mids)  # = 2 * n_positive, positives first
    npos = spectral_grid.n_positive

    g1 = rng.standard_normal(npos)
    g2 = rng.standard_normal(npos)
    w_pos = (g1 + 1j * g2) / math.sqrt(2.0)
    noise = np.concatenate([w_pos, np.conj(w_pos)])

    amps = [np.sqrt(spectral_grid.bin_mass(a)) * noise for a in exponents]

    def kernel(v: np.ndarray, t: float) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = np.empty(v.shape, dtype=complex)
        small = np.abs(v) < 1e-300
        vv = np.where(small, 1.0, v)
        out = (np.exp(1j * vv * t) - 1.0) / (1j * vv)
        out[small] = t
        return out

    # pair exclusion: slots may not share the same positive-bin index
    bin_id = np.concatenate([np.arange(npos), np.arange(npos)])

    vals = np.empty(len(ts), dtype=complex)
    if k == 1:
        for i, t in enumerate(ts):
            vals[i] = np.sum(amps[0] * kernel(mids, t))
    elif k == 2:
        pair_ok = bin_id[:, None] != bin_id[None, :]
        wmat = np.outer(amps[0], amps[1]) * pair_ok
        vsum = mids[:, None] + mids[None, :]
        for i, t in enumerate(ts):
            vals[i] = np.sum(wmat * kernel(vsum, t))
    else:
        pair_ok = bin_id[:, None] != bin_id[None, :]
        vsum12 = mids[:, None] + mids[None, :]
        for i, t in enumerate(ts):
            acc = 0.0 + 0.0j
            for b1 in range(nb):
                ok = pair_ok[b1][:, None] & pair_ok[b1][None, :] & pair_ok
                w3 = amps[0][b1] * np.outer(amps[1], amps[2]) * ok
                acc += np.sum(w3 * kernel(mids[b1] + vsum12, t))
            vals[i] = acc
    out = vals.real
    if return_residual:
        return out, vals.imag
    return out
