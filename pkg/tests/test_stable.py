import math

import numpy as np
import pytest
from scipy.integrate import quad

from hpl.rng import replica_rng
from hpl.stable import (
    StableParams,
    TimeGrid,
    potential_kernel,
    sample_increment,
    sample_increments,
    sample_path,
    transition_density,
)
from hpl.stats import energy_distance_test

ALPHA = 0.7


def test_zero_time_increment_is_exactly_zero():
    assert sample_increment(StableParams(ALPHA), 0.0, replica_rng(1, 0)) == 0.0


def test_invalid_dt_rejected():
    rng = replica_rng(1, 1)
    with pytest.raises(ValueError):
        sample_increment(StableParams(ALPHA), float("nan"), rng)
    with pytest.raises(ValueError):
        sample_increment(StableParams(ALPHA), -0.5, rng)
    with pytest.raises(ValueError):
        sample_increment(StableParams(1.0), 1.0, rng)  # CMS branch excludes alpha = 1


def test_sign_symmetry_and_sign_flip_test():
    x = sample_increments(StableParams(ALPHA), 1.0, 10**5, replica_rng(2, 0))
    n = len(x)
    assert abs(np.mean(np.sign(x))) <= 3.0 / math.sqrt(n)
    # sign-flip binomial test, p > 0.01
    k = int(np.sum(x > 0))
    z = (k - n / 2) / math.sqrt(n / 4)
    p = 2 * (1 - 0.5 * (1 + math.erf(abs(z) / math.sqrt(2))))
    assert p > 0.01


def test_characteristic_function_identity():
    # E cos(theta X) = exp(-dt |theta|^alpha), checked at several frequencies
    x = sample_increments(StableParams(ALPHA), 1.0, 10**5, replica_rng(3, 0))
    for theta in (0.5, 1.0, 2.0):
        c = np.cos(theta * x)
        se = c.std(ddof=1) / math.sqrt(len(x))
        assert abs(c.mean() - math.exp(-(theta**ALPHA))) <= 3 * se


def test_empty_grid_path():
    path = sample_path(StableParams(ALPHA), TimeGrid(t_max=0.0, n_steps=0), replica_rng(4, 0))
    assert path.values.tolist() == [0.0]


def test_paths_deterministic_given_seed():
    grid = TimeGrid.from_step(1.0, 0.01)
    a = sample_path(StableParams(ALPHA), grid, replica_rng(5, 7))
    b = sample_path(StableParams(ALPHA), grid, replica_rng(5, 7))
    assert np.array_equal(a.values, b.values)


def test_self_similarity_two_sample():
    # X(1) should match 2^(1/alpha) X(0.5) across independent runs
    grid = TimeGrid.from_step(1.0, 0.01)
    p = StableParams(ALPHA)
    end = np.array([sample_path(p, grid, replica_rng(6, i)).values[-1] for i in range(400)])
    half = np.array(
        [sample_path(p, grid, replica_rng(7, i)).values[grid.index_of(0.5)] for i in range(400)]
    )
    rep = energy_distance_test(end[:, None], (2 ** (1 / ALPHA)) * half[:, None],
                               permutations=199, rng=replica_rng(8, 0))
    assert rep.p_value > 0.01


def test_grid_invariants():
    g = TimeGrid.from_step(2.0, 0.25)
    assert g.n_steps == 8
    assert np.allclose(g.times(), 0.25 * np.arange(9))
    with pytest.raises(ValueError):
        TimeGrid.from_step(1.0, 0.3)  # does not divide evenly


def test_density_cauchy_closed_form():
    # alpha = 1 is a density-utility case only
    assert transition_density(StableParams(1.0), 1.0, 0.0) == pytest.approx(1 / math.pi, abs=1e-10)


def test_density_normalization_with_tail_estimate():
    # quadrature over [-1e4, 1e4] plus the first-order stable tail mass;
    # the window alone misses ~1.2e-3 of mass at alpha = 0.7
    p = StableParams(ALPHA)
    f = lambda x: transition_density(p, 1.0, x)
    inside = 0.0
    for a, b in ((0.0, 5.0), (5.0, 100.0), (100.0, 1e4)):
        v, _ = quad(f, a, b, limit=300)
        inside += 2 * v
    tail = 2 / math.pi * math.gamma(ALPHA) * math.sin(math.pi * ALPHA / 2) * 1e4 ** (-ALPHA)
    assert inside + tail == pytest.approx(1.0, abs=1e-4)


def test_density_scaling_identity():
    p = StableParams(ALPHA)
    lhs = transition_density(p, 2.0, 1.0)
    s = 2.0 ** (-1.0 / ALPHA)
    assert lhs == pytest.approx(s * transition_density(p, 1.0, s), abs=1e-8)
    with pytest.raises(ValueError):
        transition_density(p, 0.0, 1.0)


def test_potential_kernel_homogeneity_and_symmetry():
    p = StableParams(ALPHA)
    assert potential_kernel(p, 2.0) / potential_kernel(p, 1.0) == pytest.approx(
        2.0 ** (ALPHA - 1.0), rel=1e-12
    )
    assert potential_kernel(p, -1.0) == potential_kernel(p, 1.0)
    with pytest.raises(ZeroDivisionError):
        potential_kernel(p, 0.0)
    with pytest.raises(ValueError):
        potential_kernel(StableParams(1.2), 1.0)


def test_potential_kernel_against_time_integration():
    # direct oracle: int_0^S p_s(1) ds plus the tail p_1(0) S^(1-1/a) a/(1-a)
    p = StableParams(ALPHA)
    f = lambda s: transition_density(p, s, 1.0)
    total = 0.0
    for a, b in ((0.0, 1.0), (1.0, 100.0), (100.0, 1e4), (1e4, 1e6)):
        v, _ = quad(f, a, b, limit=300)
        total += v
    p10 = transition_density(p, 1.0, 0.0)
    tail = p10 * (1e6) ** (1.0 - 1.0 / ALPHA) * ALPHA / (1.0 - ALPHA)
    assert potential_kernel(p, 1.0) == pytest.approx(total + tail, abs=1e-4)
