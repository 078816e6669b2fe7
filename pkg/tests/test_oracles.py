import math

import numpy as np
import pytest

from hpl.oracles import (
    OracleConfig,
    SpectralGrid,
    fbm_sample,
    hermite_partial_sum,
    hermite_polynomial,
    lrd_gaussian_sequence,
    spectral_hermite_sample,
    target_covariance,
)
from hpl.rng import replica_rng


def _corr(vals):
    return float(np.mean(vals[:, 0] * vals[:, 1]) /
                 math.sqrt(np.mean(vals[:, 0] ** 2) * np.mean(vals[:, 1] ** 2)))


def _target_corr(H, s, t):
    return target_covariance(H, s, t) / math.sqrt(
        target_covariance(H, s, s) * target_covariance(H, t, t))


# ----------------------------------------------------------- covariance / fBm

def test_target_covariance_values():
    assert target_covariance(0.7, 2.0, 2.0) == pytest.approx(2.0 ** 1.4)
    assert target_covariance(0.5, 0.3, 1.2) == pytest.approx(0.3)  # Brownian case
    assert target_covariance(0.75, 0.5, 1.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        target_covariance(1.2, 1.0, 1.0)


def test_target_covariance_psd_on_grids():
    rng = replica_rng(71, 0)
    for _ in range(5):
        H = float(rng.uniform(0.55, 0.95))
        ts = np.sort(rng.uniform(0.05, 3.0, 8))
        mat = np.array([[target_covariance(H, s, t) for t in ts] for s in ts])
        np.linalg.cholesky(mat + 1e-12 * np.eye(len(ts)))


def test_fbm_starts_at_zero_and_cov():
    vals = np.array([fbm_sample(0.75, (0.0, 0.5, 1.0), replica_rng(72, i)) for i in range(10**4)])
    assert np.all(vals[:, 0] == 0.0)
    cov = float(np.mean(vals[:, 1] * vals[:, 2]))
    se = float(np.std(vals[:, 1] * vals[:, 2], ddof=1) / 100.0)
    assert abs(cov - 0.5) <= 3 * se


def test_fbm_brownian_increment_independence():
    vals = np.array([fbm_sample(0.5, (0.5, 1.0, 1.5), replica_rng(73, i)) for i in range(4000)])
    inc1 = vals[:, 1] - vals[:, 0]
    inc2 = vals[:, 2] - vals[:, 1]
    prod = inc1 * inc2
    z = prod.mean() / (prod.std(ddof=1) / math.sqrt(len(prod)))
    assert abs(z) <= 3.0


# --------------------------------------------------------- Hermite polynomials

def test_hermite_polynomial_values():
    assert hermite_polynomial(2, 2.0) == pytest.approx(3.0)
    assert hermite_polynomial(3, 1.0) == pytest.approx(-2.0)
    xs = np.linspace(-2, 2, 9)
    assert np.allclose(hermite_polynomial(4, xs), xs**4 - 6 * xs**2 + 3)


def test_hermite_orthogonality_mc():
    z = replica_rng(74, 0).standard_normal(10**6)
    prod = hermite_polynomial(2, z) * hermite_polynomial(3, z)
    se = prod.std(ddof=1) / 1000.0
    assert abs(prod.mean()) <= 3 * se


# ------------------------------------------------------------- LRD sequences

def test_lrd_variance_and_lag1():
    H, k = 0.7, 1
    per_rep_var, per_rep_lag = [], []
    for i in range(50):
        x = lrd_gaussian_sequence(H, k, 512, replica_rng(75, i))
        per_rep_var.append(np.mean(x**2))
        per_rep_lag.append(np.mean(x[:-1] * x[1:]))
    v = np.array(per_rep_var)
    assert abs(v.mean() - 1.0) <= 3 * v.std(ddof=1) / math.sqrt(len(v))
    l = np.array(per_rep_lag)
    target = 2.0 ** ((2 * H - 2) / k)
    assert abs(l.mean() - target) <= 3 * l.std(ddof=1) / math.sqrt(len(l))


def test_lrd_domain_checks():
    with pytest.raises(ValueError):
        lrd_gaussian_sequence(0.5, 1, 64, replica_rng(76, 0))  # H > 1/2 required
    with pytest.raises(ValueError):
        lrd_gaussian_sequence(0.7, 1, 8192, replica_rng(76, 1), method="cholesky")


def test_lrd_circulant_matches_cholesky_statistics():
    # compare fixed-index second moments across replicas (pooled in-sequence
    # statistics are too noisy under long memory)
    H, k, n = 0.7, 2, 16
    a = np.array([lrd_gaussian_sequence(H, k, n, replica_rng(77, i)) for i in range(4000)])
    b = np.array([
        lrd_gaussian_sequence(H, k, n, replica_rng(78, i), method="circulant")
        for i in range(4000)
    ])
    for pa, pb in (((0, 0), (0, 0)), ((0, 1), (0, 1)), ((0, 3), (0, 3))):
        xa = a[:, pa[0]] * a[:, pa[1]]
        xb = b[:, pb[0]] * b[:, pb[1]]
        se = math.hypot(xa.std(ddof=1), xb.std(ddof=1)) / math.sqrt(len(xa))
        assert abs(xa.mean() - xb.mean()) <= 3 * se


# -------------------------------------------------------------- partial sums

def test_partial_sum_zero_time():
    cfg = OracleConfig(k=2, hurst=0.75, n=256, t_grid=(0.0, 1.0))
    vals = hermite_partial_sum(cfg, replica_rng(79, 0))
    assert vals[0] == 0.0


def test_partial_sum_rosenblatt_skew_positive():
    cfg = OracleConfig(k=2, hurst=0.6, n=512, t_grid=(1.0,))
    z = np.array([hermite_partial_sum(cfg, replica_rng(80, i))[0] for i in range(2000)])
    sk = float(np.mean((z - z.mean()) ** 3) / z.std() ** 3)
    assert sk / math.sqrt(6.0 / len(z)) >= 3.0


def test_oracle_config_relations():
    cfg = OracleConfig(k=2, hurst=0.75, n=128, t_grid=(1.0,))
    assert cfg.d == pytest.approx(0.375)
    assert cfg.hurst == pytest.approx(cfg.k * cfg.d - cfg.k / 2.0 + 1.0)
    with pytest.raises(ValueError):
        OracleConfig(k=2, hurst=0.45, n=128, t_grid=(1.0,))


# ------------------------------------------------------------------ spectral

def test_spectral_zero_time_and_residual():
    grid = SpectralGrid(omega_max=20.0, delta_omega=0.25)
    out = spectral_hermite_sample(1, [0.7], (0.0, 1.0), grid, replica_rng(81, 0))
    assert out[0] == 0.0
    vals, resid = spectral_hermite_sample(
        2, [0.6, 0.6], (1.0,), grid, replica_rng(81, 1), return_residual=True)
    # conjugate symmetry makes the sum real to rounding
    assert abs(resid[0]) <= 1e-9 * max(1.0, abs(vals[0]))


def test_spectral_k1_covariance_matches_fbm():
    # alpha = 0.7 -> H = (1+alpha)/2 = 0.85, within 10% after normalization
    grid = SpectralGrid(omega_max=60.0, delta_omega=0.05)
    vals = np.array([
        spectral_hermite_sample(1, [0.7], (0.5, 1.0), grid, replica_rng(82, i))
        for i in range(3000)
    ])
    assert abs(_corr(vals) - _target_corr(0.85, 0.5, 1.0)) <= 0.10 * _target_corr(0.85, 0.5, 1.0)


def test_spectral_k2_grid_refinement_cauchy():
    # successive normalized-covariance estimates contract along a grid ladder
    ladder = [
        SpectralGrid(omega_max=10.0, delta_omega=1.0),
        SpectralGrid(omega_max=20.0, delta_omega=0.4),
        SpectralGrid(omega_max=40.0, delta_omega=0.16),
    ]
    cs = []
    for j, grid in enumerate(ladder):
        vals = np.array([
            spectral_hermite_sample(2, [0.6, 0.6], (0.5, 1.0), grid, replica_rng(83, i))
            for i in range(600)
        ])
        cs.append(_corr(vals))
    assert abs(cs[2] - cs[1]) <= abs(cs[1] - cs[0])


def test_spectral_input_validation():
    grid = SpectralGrid(omega_max=10.0, delta_omega=0.5)
    with pytest.raises(ValueError):
        spectral_hermite_sample(4, [0.7] * 4, (1.0,), grid, replica_rng(84, 0))
    with pytest.raises(ValueError):
        spectral_hermite_sample(2, [0.7], (1.0,), grid, replica_rng(84, 1))
    with pytest.raises(ValueError):
        SpectralGrid(omega_max=0.0, delta_omega=0.5)


def test_cross_oracle_consistency_k2():
    # partial-sum and spectral oracles agree on the normalized covariance for
    # (k=2, H=0.6) within the combined MC + discretization budget (15%)
    H = 0.6
    psum_cfg = OracleConfig(k=2, hurst=H, n=2048, t_grid=(0.5, 1.0))
    a = np.array([hermite_partial_sum(psum_cfg, replica_rng(85, i)) for i in range(1500)])
    grid = SpectralGrid(omega_max=40.0, delta_omega=0.16)
    b = np.array([
        spectral_hermite_sample(2, [2 * (H - 1) / 2 + 1] * 2, (0.5, 1.0), grid, replica_rng(86, i))
        for i in range(600)
    ])
    ca, cb = _corr(a), _corr(b)
    assert abs(ca - cb) <= 0.15 * max(abs(ca), abs(cb))
