"""Distribution algebra tests.

The oracle here enumerates the full joint outcome space of independent
draws, one index tuple at a time, and never goes through the CDF/survival
product route used by the implementation.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from insuresim.dist import (
    DEFAULT_BIN_CAP,
    EmpiricalDistribution,
    max_compose,
    mean_compose,
    min_compose,
    rebin,
)


def oracle_compose(dists, combine):
    """Brute-force joint enumeration of independent draws."""
    out: dict[float, float] = {}
    for combo in itertools.product(*[d.to_pairs() for d in dists]):
        values = [v for v, _ in combo]
        prob = math.prod(p for _, p in combo)
        key = combine(values)
        out[key] = out.get(key, 0.0) + prob
    pairs = sorted(out.items())
    return [v for v, _ in pairs], [p for _, p in pairs]


def mean_of(values):
    total = 0.0
    for v in values:
        total = total + v
    return total * (1.0 / len(values))


def assert_matches_oracle(result, expect_support, expect_mass, tol=1e-12):
    assert len(result) == len(expect_support)
    assert np.allclose(result.support, expect_support, rtol=0.0, atol=tol)
    assert np.allclose(result.mass, expect_mass, rtol=0.0, atol=tol)


def random_dist(rng, max_points=5, lo=1.0, hi=100.0):
    n = int(rng.integers(1, max_points + 1))
    support = np.unique(np.round(rng.uniform(lo, hi, size=n), 6))
    mass = rng.dirichlet(np.ones(len(support)))
    return EmpiricalDistribution(support, mass)


def test_expectation_frozen_value():
    d = EmpiricalDistribution.from_pairs({1.0: 0.25, 2.0: 0.25, 4.0: 0.5})
    assert d.expectation() == pytest.approx(2.75, abs=1e-12)


def test_point_mass_expectation():
    assert EmpiricalDistribution.point(7.0).expectation() == pytest.approx(7.0)


def test_max_compose_iid_pair():
    d = EmpiricalDistribution.from_pairs({2.0: 0.5, 4.0: 0.5})
    m = max_compose(d, d)
    assert_matches_oracle(m, [2.0, 4.0], [0.25, 0.75])
    assert m.expectation() == pytest.approx(3.5, abs=1e-12)


def test_max_compose_three_fold():
    d = EmpiricalDistribution.from_pairs({2.0: 0.5, 4.0: 0.5})
    m = max_compose(max_compose(d, d), d)
    assert m.mass[0] == pytest.approx(0.125, abs=1e-12)
    assert m.expectation() == pytest.approx(3.75, abs=1e-12)


def test_max_compose_with_dominated_point_mass_is_identity():
    d = EmpiricalDistribution.from_pairs({5.0: 0.5, 9.0: 0.5})
    low = EmpiricalDistribution.point(1.0)
    m = max_compose(d, low)
    assert m.approx_equal(d, tol=1e-12)


def test_min_compose_iid_pair():
    d = EmpiricalDistribution.from_pairs({2.0: 0.5, 4.0: 0.5})
    m = min_compose(d, d)
    assert_matches_oracle(m, [2.0, 4.0], [0.75, 0.25])
    assert m.expectation() == pytest.approx(2.5, abs=1e-12)


def test_mean_compose_iid_pair():
    d = EmpiricalDistribution.from_pairs({10.0: 0.5, 20.0: 0.5})
    m = mean_compose([d, d])
    assert_matches_oracle(m, [10.0, 15.0, 20.0], [0.25, 0.5, 0.25])


def test_mean_compose_rejects_empty():
    with pytest.raises(ValueError):
        mean_compose([])


def test_compositions_match_joint_enumeration():
    rng = np.random.default_rng(7)
    for _ in range(300):
        a = random_dist(rng)
        b = random_dist(rng)
        for op, combine in ((max_compose, max), (min_compose, min)):
            support, mass = oracle_compose([a, b], combine)
            assert_matches_oracle(op(a, b), support, mass)
        support, mass = oracle_compose([a, b], mean_of)
        assert_matches_oracle(mean_compose([a, b]), support, mass)


def test_mean_compose_three_inputs_matches_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(50):
        dists = [random_dist(rng, max_points=4) for _ in range(3)]
        support, mass = oracle_compose(dists, mean_of)
        got = mean_compose(dists)
        assert_matches_oracle(got, support, mass, tol=1e-9)


def test_max_compose_commutative_associative():
    rng = np.random.default_rng(3)
    for _ in range(100):
        a, b, c = (random_dist(rng) for _ in range(3))
        ab = max_compose(a, b)
        ba = max_compose(b, a)
        assert ab.approx_equal(ba, tol=1e-9)
        left = max_compose(ab, c)
        right = max_compose(a, max_compose(b, c))
        assert left.approx_equal(right, tol=1e-9)


def test_expectation_bounds_under_composition():
    rng = np.random.default_rng(5)
    for _ in range(200):
        a = random_dist(rng)
        b = random_dist(rng)
        top = max_compose(a, b).expectation()
        bottom = min_compose(a, b).expectation()
        assert top >= max(a.expectation(), b.expectation()) - 1e-9
        assert bottom <= min(a.expectation(), b.expectation()) + 1e-9


def test_diminishing_per_copy_rate_share():
    # r(n) = E[max of n iid draws]; r(n)/n must be non-increasing.
    rng = np.random.default_rng(13)
    for _ in range(100):
        d = random_dist(rng)
        acc = d
        shares = [acc.expectation()]
        for n in range(2, 7):
            acc = max_compose(acc, d)
            shares.append(acc.expectation() / n)
        for lo, hi in zip(shares[1:], shares[:-1]):
            assert lo <= hi + 1e-9


def test_rebin_caps_support_and_preserves_expectation():
    rng = np.random.default_rng(17)
    support = np.sort(rng.uniform(1.0, 500.0, size=400))
    support = np.unique(support)
    mass = rng.dirichlet(np.ones(len(support)))
    d = EmpiricalDistribution(support, mass)
    r = rebin(d, DEFAULT_BIN_CAP)
    assert len(r) <= DEFAULT_BIN_CAP
    assert r.expectation() == pytest.approx(d.expectation(), rel=1e-6)


def test_rebin_merges_colliding_group_means():
    # ULP-spaced support values whose grouped weighted means round to the
    # same float; rebin must merge the run instead of emitting duplicates
    support = np.array([
        293.5852379849293, 293.5852379849294, 293.58523798492945,
        293.5852379849295, 293.5852379849296, 293.5852379849297,
        293.5852379849298, 293.5852379849299,
    ])
    mass = np.array([
        0.0028892528292133977, 0.445508906715543, 0.05402771710179409,
        0.2466193927203789, 0.01236734669568629, 0.0441513717994838,
        0.00011180610254715796, 0.1943242060353534,
    ])
    d = EmpiricalDistribution(support, mass / mass.sum())
    r = rebin(d, 4)
    assert len(r) <= 4
    assert np.all(np.diff(r.support) > 0.0)
    assert r.expectation() == pytest.approx(d.expectation(), rel=1e-12)


def test_rebin_identity_when_under_cap():
    d = EmpiricalDistribution.from_pairs({1.0: 0.5, 2.0: 0.5})
    assert rebin(d, 64) is d


def test_rebin_rejects_tiny_cap():
    d = EmpiricalDistribution.from_pairs({1.0: 0.5, 2.0: 0.5})
    with pytest.raises(ValueError):
        rebin(d, 1)


def test_from_samples_equal_mass():
    d = EmpiricalDistribution.from_samples([10.0, 10.0, 20.0, 20.0])
    assert d.to_pairs() == [(10.0, 0.5), (20.0, 0.5)]


def test_validation_rejects_bad_inputs():
    with pytest.raises(ValueError):
        EmpiricalDistribution(np.array([2.0, 1.0]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        EmpiricalDistribution(np.array([-1.0, 2.0]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        EmpiricalDistribution(np.array([1.0, 2.0]), np.array([0.7, 0.7]))
    with pytest.raises(ValueError):
        EmpiricalDistribution(np.array([]), np.array([]))


def test_sampling_is_deterministic_per_seed():
    d = EmpiricalDistribution.from_pairs({2.0: 0.3, 4.0: 0.7})
    draws_a = [d.sample(np.random.default_rng(42)) for _ in range(5)]
    draws_b = [d.sample(np.random.default_rng(42)) for _ in range(5)]
    assert draws_a == draws_b
