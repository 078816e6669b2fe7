import itertools
import math

import numpy as np
import pytest

from hpl.kernels import Mollifier, ScaledMollifier
from hpl.particles import Window
from hpl.rng import replica_rng
from hpl.wick import (
    CheckReport,
    PairSet,
    TensorTestFunction,
    cancellation_identity,
    enumerate_pair_sets,
    mecke_palm_check,
    second_moment_permutation_check,
    wick_product,
    wick_vs_k_functional_check,
)


def _count_by_formula(k):
    return sum(math.comb(k, 2 * j) * math.prod(range(1, 2 * j, 2)) for j in range(k // 2 + 1))


def _count_by_subset_filter(k):
    # filter every subset of the full pair universe for disjointness
    universe = list(itertools.combinations(range(1, k + 1), 2))
    count = 0
    for r in range(len(universe) + 1):
        for subset in itertools.combinations(universe, r):
            used = [i for p in subset for i in p]
            if len(set(used)) == len(used):
                count += 1
    return count


def test_pair_sets_small_cases():
    assert sorted(ps.pairs for ps in enumerate_pair_sets(2)) == [(), ((1, 2),)]
    assert len(enumerate_pair_sets(3)) == 4
    assert len(enumerate_pair_sets(4)) == 10


@pytest.mark.parametrize("k", range(1, 9))
def test_pair_set_counts_and_validity(k):
    sets = enumerate_pair_sets(k)
    assert len(sets) == _count_by_formula(k)
    if k <= 5:
        assert len(sets) == _count_by_subset_filter(k)
    seen = set()
    for ps in sets:
        assert len(ps.covered) == 2 * len(ps)  # disjointness
        assert ps.pairs not in seen
        seen.add(ps.pairs)


def test_pair_set_validation():
    with pytest.raises(ValueError):
        PairSet(((1, 2), (2, 3)))
    with pytest.raises(ValueError):
        PairSet(((1, 1),))


def test_wick_product_low_orders():
    # k = 1: no pairs, raw evaluation
    assert wick_product(np.array([[2.5]]), np.zeros((1, 1, 1))) == 2.5
    # k = 2: product minus covariance
    ev = np.array([[1.5, 2.0]])
    cv = np.array([[[1.0, 0.3], [0.3, 2.0]]])
    assert wick_product(ev, cv) == pytest.approx(1.5 * 2.0 - 0.3)
    # k = 3 with one zero factor and zero covariances against it
    ev3 = np.array([[1.1, 0.0, 2.0]])
    cv3 = np.zeros((1, 3, 3))
    cv3[0] = [[1.0, 0.0, 0.4], [0.0, 0.0, 0.0], [0.4, 0.0, 1.0]]
    assert wick_product(ev3, cv3) == pytest.approx(0.0)


def test_wick_product_missing_covariance():
    ev = np.array([[1.0, 1.0]])
    cv = np.full((1, 2, 2), np.nan)
    with pytest.raises(ValueError):
        wick_product(ev, cv)


@pytest.mark.parametrize("n", range(1, 9))
def test_cancellation_identity(n):
    assert cancellation_identity(n) == 0
    # independent binomial oracle
    assert sum((-1) ** m * math.comb(2 * n, m) for m in range(2 * n + 1)) == 0


def test_mecke_palm_trivial_and_k1():
    zero = lambda x: np.zeros_like(np.asarray(x, float))
    rep = mecke_palm_check(zero, Window(2.0), 1, 200, replica_rng(61, 0), quad_rhs=0.0)
    assert rep.lhs == 0.0 and rep.rhs == 0.0
    ind = lambda x: ((np.asarray(x) >= 0) & (np.asarray(x) < 1)).astype(float)
    rep = mecke_palm_check(ind, Window(3.0), 1, 10**4, replica_rng(61, 1), quad_rhs=1.0)
    assert rep.passed(3.0)


def test_mecke_palm_gaussian_pair():
    F = lambda x, y: np.exp(-np.asarray(x) ** 2 - np.asarray(y) ** 2)
    rhs = math.pi * math.erf(3.0) ** 2
    rep = mecke_palm_check(F, Window(3.0), 2, 10**4, replica_rng(61, 2), quad_rhs=rhs)
    assert rep.passed(3.0)
    # rhs via numerical quadrature agrees
    rep2 = mecke_palm_check(F, Window(3.0), 2, 2000, replica_rng(61, 3))
    assert rep2.rhs == pytest.approx(rhs, rel=1e-8)


def test_permutation_second_moment_k1():
    F = lambda x: np.exp(-np.asarray(x) ** 2)
    rep = second_moment_permutation_check(F, 1, 0.7, 1.0, Window(60.0), 4000, replica_rng(62, 0))
    assert rep.passed(3.0)
    assert isinstance(rep.to_json(), str)


def test_wick_functional_zero_tensor():
    zero = lambda x: np.zeros_like(np.asarray(x, float))
    zero.support = (-1.0, 1.0)
    phi = TensorTestFunction(((zero, zero),))
    out = wick_vs_k_functional_check(phi, 0.75, 2.0, 0.25, Window(5.0), 50,
                                     replica_rng(63, 0), calibration_factor=1)
    assert out["E_diff_sq"] == 0.0
    assert out["E_wick_sq"] == 0.0
    assert out["E_rho_sq"] == 0.0


def test_tensor_test_function_shape_validation():
    f = lambda x: np.asarray(x, float)
    with pytest.raises(ValueError):
        TensorTestFunction(((f, f), (f,)))
    with pytest.raises(ValueError):
        TensorTestFunction(())
