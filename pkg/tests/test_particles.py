import math

import numpy as np
import pytest
from scipy.integrate import quad

from hpl.kernels import Mollifier, StepFunction, smoothed_indicator
from hpl.particles import Window, occupation_field, sample_system, window_for
from hpl.rng import replica_rng
from hpl.stable import TimeGrid, abs_stable_quantile

ALPHA = 0.7
FLAT = TimeGrid(t_max=0.0, n_steps=0)  # point systems, no motion


def test_degenerate_window_rejected():
    with pytest.raises(ValueError):
        Window(0.0)
    with pytest.raises(ValueError):
        window_for(0.0, 0.0, ALPHA, 0.9)


def test_poisson_count_mean():
    L = 10.0
    counts = np.array([
        sample_system(ALPHA, Window(L), FLAT, replica_rng(21, i)).size for i in range(10**4)
    ])
    se = math.sqrt(2 * L / 10**4)
    assert abs(counts.mean() - 2 * L) <= 3 * se


def test_poisson_count_independence_across_cells():
    # counts in [-10, 0) and [0, 10) are independent Poisson(10)
    left, right = [], []
    for i in range(10**4):
        s = sample_system(ALPHA, Window(10.0), FLAT, replica_rng(22, i))
        left.append(np.sum(s.points < 0))
        right.append(np.sum(s.points >= 0))
    left, right = np.array(left, float), np.array(right, float)
    cov = np.mean((left - left.mean()) * (right - right.mean()))
    se = np.std((left - left.mean()) * (right - right.mean()), ddof=1) / 100.0
    assert abs(cov) <= 3 * se


def test_window_for_formula():
    assert window_for(1.0, 0.0, ALPHA, 0.9).half_width == 1.0  # no motion
    c = abs_stable_quantile(ALPHA, 0.9)
    w1 = window_for(0.0, 1.0, ALPHA, 0.9).half_width
    w2 = window_for(0.0, 2.0, ALPHA, 0.9).half_width
    assert w2 / w1 == pytest.approx(2 ** (1 / ALPHA), rel=1e-12)
    assert w1 == pytest.approx(c, rel=1e-12)
    with pytest.raises(ValueError):
        window_for(1.0, 1.0, ALPHA, 1.0)


def test_quantile_estimation_deterministic():
    a = abs_stable_quantile(0.7, 0.999)
    b = abs_stable_quantile(0.7, 0.999)
    assert a == b
    assert a > abs_stable_quantile(0.7, 0.9)


def test_occupation_zero_function_and_domain():
    grid = TimeGrid.from_step(2.0, 0.1)
    s = sample_system(ALPHA, Window(5.0), grid, replica_rng(23, 0))
    zero = lambda x: np.zeros_like(np.asarray(x, float))
    assert occupation_field(s, zero, 2.0) == 0.0
    with pytest.raises(ValueError):
        occupation_field(s, zero, 3.0)  # beyond horizon


def test_occupation_linearity_per_realization():
    grid = TimeGrid.from_step(2.0, 0.1)
    s = sample_system(ALPHA, Window(5.0), grid, replica_rng(24, 1))
    phi = StepFunction.indicator(1.0)
    psi = StepFunction((1.0,), ((0.5, 1.5),))
    combo = StepFunction((2.0, -3.0), ((0.0, 1.0), (0.5, 1.5)))
    lhs = occupation_field(s, combo, 2.0)
    rhs = 2.0 * occupation_field(s, phi, 2.0) - 3.0 * occupation_field(s, psi, 2.0)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_occupation_mean_centered():
    grid = TimeGrid.from_step(10.0, 0.25)
    w = window_for(1.0, 10.0, ALPHA, 0.75)
    phi = StepFunction.indicator(1.0)
    vals = np.array([
        occupation_field(sample_system(ALPHA, w, grid, replica_rng(25, i)), phi, 10.0)
        for i in range(400)
    ])
    assert abs(vals.mean()) <= 3 * vals.std(ddof=1) / 20.0


def _exact_variance(phi_hat_sq, alpha, T):
    # (1/pi) int |phi_hat|^2 K_T(|u|^alpha) du with the finite-horizon kernel
    def kern(u):
        c = u**alpha
        if T == math.inf:
            kt = 2.0 / c
        else:
            kt = 2.0 * (1.0 / c - (1.0 - math.exp(-c * T)) / (c * c * T))
        return phi_hat_sq(u) * kt
    v1, _ = quad(kern, 0, 50, limit=400)
    v2, _ = quad(kern, 50, np.inf, limit=400)
    return (v1 + v2) / math.pi


def test_occupation_variance_matches_quadrature():
    # variance against the exact finite-horizon covariance functional; the
    # T = infinity value of the spec example sits ~16% below at T = 100, so
    # the finite-T kernel is the honest quadrature oracle (see ledger), and
    # the trend toward the limit is checked in test_acceptance (criterion 7)
    T = 50.0
    kappa = 0.01
    grid = TimeGrid.from_step(T, 0.25)
    w = window_for(1.0, T, ALPHA, 0.75)
    sm = smoothed_indicator(StepFunction.indicator(1.0), Mollifier("bump"), kappa)
    vals = np.array([
        occupation_field(sample_system(ALPHA, w, grid, replica_rng(26, i)), sm, T)
        for i in range(400)
    ])
    mc = float(np.mean(vals**2))

    g = Mollifier("bump")
    def phi_hat_sq(u):
        base = (2.0 - 2.0 * math.cos(u)) / u**2 if u > 1e-9 else 1.0
        return base * g.fourier(kappa * u) ** 2
    target = _exact_variance(phi_hat_sq, ALPHA, T)
    se = float(np.std(vals**2, ddof=1) / 20.0)
    assert abs(mc - target) <= max(0.10 * target, 3 * se)


def test_system_immutable_shapes():
    grid = TimeGrid.from_step(1.0, 0.5)
    s = sample_system(ALPHA, Window(3.0), grid, replica_rng(27, 0))
    assert s.positions.shape == (s.size, 3)
    assert set(np.unique(s.charges)).issubset({-1, 1})
    paths = s.paths
    assert len(paths) == s.size
    if s.size:
        assert paths[0].values[0] == 0.0
