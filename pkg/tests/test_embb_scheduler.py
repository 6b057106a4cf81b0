import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybrid_tti.embb_scheduler import (CodeBlockConfig, SlotBlocks, account_slot, allocate_rbs,
                                       decode_outcome, group_blocks, predicted_bler,
                                       select_redundancy, select_redundancy_units)
from hybrid_tti.predictor import Pmf


def test_single_user_owns_everything():
    np.testing.assert_array_equal(allocate_rbs(np.full((1, 5), 2.0), [1.0]), np.zeros(5))


def test_larger_capacity_wins():
    assert allocate_rbs(np.array([[3.0], [1.0]]), [1.0, 1.0])[0] == 0


def test_equal_score_goes_to_lowest_user():
    assert allocate_rbs(np.array([[3.0], [3.0]]), [2.0, 2.0])[0] == 0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.sampled_from([2.0 ** e for e in range(-6, 7)]))
def test_allocation_invariant_to_history_scale(seed, c):
    rng = np.random.default_rng(seed)
    gamma = rng.exponential(10.0, (6, 9))
    hist = rng.uniform(0.1, 5, 6)
    np.testing.assert_array_equal(allocate_rbs(gamma, hist), allocate_rbs(gamma, hist * c))


def test_never_preempted_needs_no_redundancy():
    assert select_redundancy(Pmf.point(0), 0.1, 7) == 0.0


def test_tail_enumeration_example():
    # P(Y>0) = 0.15 > 0.1, P(Y>1) = 0.05 <= 0.1
    pmf = Pmf(np.array([0.85, 0.10, 0.05]))
    assert select_redundancy(pmf, 0.1, 7) == pytest.approx(1 / 7)


def test_vacuous_target():
    assert select_redundancy(Pmf(np.array([0.1, 0.2, 0.3, 0.4])), 1 - 1e-12, 7) == 0.0


def test_infeasible_block_capped():
    units, ok = select_redundancy_units(Pmf.point(7), 0.1, 7, theta_max=0.8)
    assert (units, ok) == (5, False)


def test_support_beyond_units_rejected():
    with pytest.raises(ValueError):
        select_redundancy(Pmf(np.ones(9) / 9), 0.1, 7)


pmfs = st.lists(st.floats(0, 1), min_size=8, max_size=8).filter(lambda w: sum(w) > 0.05).map(
    lambda w: Pmf(np.asarray(w) / sum(w)))


@settings(max_examples=200, deadline=None)
@given(pmfs, st.floats(0.01, 0.5), st.floats(0.01, 0.5))
def test_redundancy_meets_target_and_is_monotone(pmf, e1, e2):
    units, ok = select_redundancy_units(pmf, e1, 7, theta_max=1.0)
    assert ok
    assert pmf.mass[units + 1:].sum() <= e1 + 1e-12
    if units > 0:
        assert pmf.mass[units:].sum() > e1 - 1e-12
    lo, hi = sorted((e1, e2))
    assert select_redundancy(pmf, hi, 7, 1.0) <= select_redundancy(pmf, lo, 7, 1.0)


@settings(max_examples=100, deadline=None)
@given(pmfs, st.integers(0, 6))
def test_stochastically_larger_never_lowers_redundancy(pmf, shift_from):
    # move mass from y to y+1 for every y >= shift_from: first-order larger
    mass = pmf.mass.copy()
    moved = mass.copy()
    moved[shift_from:] = 0
    moved[shift_from + 1:] += mass[shift_from:-1]
    moved[-1] += mass[-1]
    larger = Pmf(moved)
    assert select_redundancy(larger, 0.1, 7, 1.0) >= select_redundancy(pmf, 0.1, 7, 1.0)


def test_sigmoid_midpoint():
    assert predicted_bler(Pmf.point(3), 3 / 7, 50.0, 7) == pytest.approx(0.5)


def test_sigmoid_far_below_threshold():
    expected = 1 / (1 + math.exp(50 * 3 / 7))
    assert predicted_bler(Pmf.point(0), 3 / 7, 50.0, 7) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(4.9e-10, rel=0.02)


@given(st.integers(0, 6), st.integers(0, 7), st.floats(0, 1))
def test_sigmoid_monotone(y, th, extra):
    f = lambda y_, th_: predicted_bler(Pmf.point(y_), th_ / 7, 20.0, 7)
    assert f(y, th) <= f(y + 1, th)
    assert f(y, min(th + 1, 7)) <= f(y, th)


def _block(theta_units, units=7, cap=336.0):
    return CodeBlockConfig(owner=0, rbs=(0,), capacity_bits=cap, theta_units=theta_units,
                           units_total=units)


def test_decode_threshold():
    assert decode_outcome(_block(0), 0)
    assert decode_outcome(_block(1), 1)
    assert not decode_outcome(_block(1), 2)
    assert not decode_outcome(_block(0), 1)


@given(st.integers(0, 7), st.integers(0, 7))
def test_decode_matches_capacity_rule_and_is_monotone(theta, u):
    b = _block(theta)
    remaining = (1 - u / 7) * b.capacity_bits
    assert decode_outcome(b, u) == (remaining >= b.info_bits - 1e-9)
    if decode_outcome(b, u):
        assert all(decode_outcome(b, v) for v in range(u))


def _slot(owner, info, theta_units=None):
    n = len(owner)
    return SlotBlocks(owner=np.asarray(owner), capacity_bits=np.asarray(info, dtype=float),
                      theta_units=np.zeros(n, dtype=int) if theta_units is None else np.asarray(theta_units),
                      units_total=np.full(n, 7), predicted_bler=np.zeros(n), rb_block=np.arange(n))


def test_accounting():
    blocks = _slot([0, 0], [336.0, 500.0])
    bits, att, err = account_slot(blocks, [True, True], 1)
    assert bits[0] == 836 and att[0] == 2 and err[0] == 0
    bits, _, err = account_slot(blocks, [False, False], 1)
    assert bits[0] == 0 and err[0] == 2
    bits, _, err = account_slot(blocks, [True, False], 1)
    assert bits[0] == 336 and err[0] == 1


def test_user_blocks_group_rbs():
    owner = np.array([1, 0, 1, 1])
    rbs = np.arange(4)
    b_owner, cap, units, rb_block, members = group_blocks(owner, rbs, np.array([1., 2., 3., 4.]), 7, 4, "user")
    np.testing.assert_array_equal(b_owner, [0, 1])
    np.testing.assert_array_equal(cap, [2., 8.])
    np.testing.assert_array_equal(units, [7, 21])
    np.testing.assert_array_equal(rb_block, [1, 0, 1, 1])
    slot = SlotBlocks(b_owner, cap, np.zeros(2, dtype=int), units, np.zeros(2), rb_block)
    np.testing.assert_array_equal(slot.preempted_units([1, 0, 2, 3]), [0, 6])
    assert slot.block(1).rbs == (0, 2, 3)
