import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybrid_tti.predictor import (Pmf, advance_queue_pmf, departure_pmf, departure_pmfs,
                                  expected_preemptions_by_recursion, init_pmf_known, poisson_pmf,
                                  rank_preemption_pmfs, rankset_preemption_pmf)

from oracles import enumerate_slot, monte_carlo_slot, total_variation

# frozen from oracles.enumerate_slot(0, 0.7, 2, 3, n_max=25)
ENUM_D = np.array([
    [1.0, 0.0, 0.0],
    [0.496585303791, 0.347609712654, 0.155804983555],
    [0.479631094866, 0.349838892845, 0.170530012288],
])
ENUM_Y = np.array([
    [0.246596963942, 0.483022470775, 0.270380565284, 0.0],
    [0.712665225791, 0.248334552574, 0.039000221634, 0.0],
])


def paper_advance(p, a, n_s, size):
    """Literal form: p'_i = a_i (p_0 + ... + p_ns) + sum_{k<i} a_k p_{ns+i-k}."""
    get = lambda v, i: v[i] if i < len(v) else 0.0
    head = sum(get(p, j) for j in range(n_s + 1))
    return np.array([get(a, i) * head + sum(get(a, k) * get(p, n_s + i - k) for k in range(i))
                     for i in range(size)])


def test_poisson_zero_rate_is_point_mass():
    np.testing.assert_array_equal(poisson_pmf(0.0).mass, [1.0])


def test_poisson_unit_rate_head():
    pmf = poisson_pmf(1.0)
    assert pmf[0] == pytest.approx(math.exp(-1), abs=1e-9)
    assert pmf[1] == pytest.approx(math.exp(-1), abs=1e-9)


def test_poisson_truncation_point():
    pmf = poisson_pmf(2.5, 1e-12)
    assert pmf.support_max <= 30
    assert abs(pmf.total() - 1) <= 1e-9
    # smallest N with P(G > N) < eps: the previous N must still exceed eps
    n = pmf.support_max
    tail = lambda k: 1 - sum(math.exp(-2.5) * 2.5 ** j / math.factorial(j) for j in range(k + 1))
    assert tail(n - 1) >= 1e-12


def test_poisson_rejects_negative_rate():
    with pytest.raises(ValueError):
        poisson_pmf(-0.5)


def test_empty_queue_refills_with_arrivals():
    a = poisson_pmf(1.3)
    np.testing.assert_allclose(advance_queue_pmf(init_pmf_known(0), a, 25).mass, a.mass)


def test_deterministic_drain():
    out = advance_queue_pmf(Pmf.point(27), Pmf.point(0), 25)
    np.testing.assert_array_equal(out.padded(3)[:3], [0, 0, 1])
    assert out.total() == 1


@pytest.mark.parametrize("n_s", [1, 2, 5])
def test_advance_matches_literal_recursion(n_s, rng):
    p = Pmf(rng.dirichlet(np.ones(12)))
    a = poisson_pmf(1.7)
    ours = advance_queue_pmf(p, a, n_s).mass
    np.testing.assert_allclose(ours, paper_advance(p.mass, a.mass, n_s, len(ours)), atol=1e-15)


def test_advance_matches_monte_carlo(rng):
    p = Pmf(rng.dirichlet(np.ones(9)))
    a = poisson_pmf(2.0)
    n = 1_000_000
    length = rng.choice(len(p.mass), size=n, p=p.mass)
    nxt = np.maximum(length - 3, 0) + rng.poisson(2.0, n)
    emp = np.bincount(nxt) / n
    assert total_variation(advance_queue_pmf(p, a, 3).mass, emp) <= 0.01


@pytest.mark.parametrize("l0", [0, 7])
def test_known_initial_length(l0):
    pmf = init_pmf_known(l0)
    assert pmf[l0] == 1 and pmf.total() == 1


def test_departure_saturation_and_identity():
    np.testing.assert_array_equal(departure_pmf(Pmf.point(27), 25).mass, np.eye(26)[25])
    np.testing.assert_array_equal(departure_pmf(Pmf.point(3), 25).mass, np.eye(26)[3])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=40).filter(lambda v: sum(v) > 0.1),
       st.integers(1, 30))
def test_departure_conserves_mass(w, n_s):
    p = Pmf(np.asarray(w) / sum(w))
    assert abs(departure_pmf(p, n_s).total() - 1) < 1e-12


def test_rankset_zero_arrivals():
    assert rankset_preemption_pmf(0, 0.0, 25, 7, {0}).mass[0] == 1.0


def test_rankset_guaranteed_saturation():
    pmf = rankset_preemption_pmf(7 * 25, 0.0, 25, 7, {0, 4, 24})
    assert pmf[21] == 1.0 and pmf.support_max == 21


def test_rankset_rejects_empty():
    with pytest.raises(ValueError):
        rankset_preemption_pmf(0, 1.0, 25, 7, set())


def test_small_chain_matches_enumeration():
    np.testing.assert_allclose(
        [q.mass for q in departure_pmfs(0, 0.7, 2, 3)], ENUM_D, atol=1e-11)
    np.testing.assert_allclose(rank_preemption_pmfs(0, 0.7, 2, 3), ENUM_Y, atol=1e-11)


@pytest.mark.parametrize("l0,lam", [(0, 1.9), (4, 0.4), (1, 3.0)])
def test_chain_matches_live_enumeration(l0, lam):
    d_exact, y_exact = enumerate_slot(l0, lam, 3, 3, n_max=22)
    np.testing.assert_allclose([q.padded(4) for q in departure_pmfs(l0, lam, 3, 3)], d_exact, atol=1e-9)
    np.testing.assert_allclose(rank_preemption_pmfs(l0, lam, 3, 3), y_exact, atol=1e-9)


def test_rank_pmf_matches_monte_carlo(rng):
    _, y_mc = monte_carlo_slot(0, 0.7, 2, 3, 1_000_000, rng)
    assert total_variation(rankset_preemption_pmf(0, 0.7, 2, 3, {0}).mass, y_mc[0]) <= 0.01


def test_joint_rankset_matches_monte_carlo(rng):
    n = 400_000
    length = np.zeros(n, dtype=np.int64)
    total = np.zeros(n, dtype=np.int64)
    ranks = np.array([0, 2, 3])
    for _ in range(4):
        d = np.minimum(length, 5)
        total += (ranks[None, :] < d[:, None]).sum(axis=1)
        length = length - d + rng.poisson(2.2, n)
    emp = np.bincount(total, minlength=13) / n
    assert total_variation(rankset_preemption_pmf(0, 2.2, 5, 4, {0, 2, 3}).mass, emp) <= 0.01


@pytest.mark.parametrize("l0", [0, 3, 30])
def test_mean_consistency_and_monotonicity(l0):
    pmfs = rank_preemption_pmfs(l0, 1.5, 25, 7)
    means = pmfs @ np.arange(8)
    np.testing.assert_allclose(means, expected_preemptions_by_recursion(l0, 1.5, 25, 7), atol=1e-9)
    assert np.all(np.diff(means) <= 1e-12)


def test_additivity_of_means():
    ranks = {1, 4, 9}
    joint = rankset_preemption_pmf(2, 2.0, 25, 7, ranks).mean()
    single = sum(rankset_preemption_pmf(2, 2.0, 25, 7, {k}).mean() for k in ranks)
    assert joint == pytest.approx(single, abs=1e-9)


@pytest.mark.parametrize("lam", [0.5, 1.5, 2.5])
def test_stochastic_dominance_and_normalization(lam):
    pmfs = rank_preemption_pmfs(1, lam, 25, 7)
    assert np.all(np.abs(pmfs.sum(axis=1) - 1) <= 1e-9)
    ccdf = np.array([Pmf(row).tail() for row in pmfs])
    assert np.all(ccdf[:-1] >= ccdf[1:] - 1e-12)


def test_zero_arrival_collapse():
    pmfs = rank_preemption_pmfs(0, 0.0, 25, 7)
    assert np.all(pmfs[:, 0] == 1.0)
