import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vrds.allocation import (AllocationPlan, FFamily, allocate_f, allocate_neyman, integerize_allocation,
                             integerize_neyman, plan_from_f, plan_from_sigma, theoretical_variance)
from vrds.errors import AllocationError, BudgetError, DegenerateAllocationError, FamilyError
from vrds.exact import exact_shapley
from vrds.game import GloveGame, RandomBoundedGame, SymmetricMajorityGame, WeightedVotingGame


def test_neyman_examples():
    assert np.allclose(allocate_neyman([2, 1, 1], 40), [20, 10, 10])
    assert np.allclose(allocate_neyman([1, 1], 10), [5, 5])
    assert np.allclose(allocate_neyman([0, 3], 9), [0, 9])


def test_neyman_degenerate():
    with pytest.raises(DegenerateAllocationError):
        allocate_neyman([0, 0, 0], 10)


def test_f_examples():
    assert np.allclose(allocate_f(5, 50, FFamily("constant")), 10)
    assert np.allclose(allocate_f(4, 100, FFamily("harmonic")), [48, 24, 16, 12])
    assert np.allclose(allocate_f(4, 100, FFamily.power(-1)), allocate_f(4, 100, FFamily("harmonic")))


def test_integerize_examples():
    assert integerize_allocation([48, 24, 16, 12], 100).counts == (48, 24, 16, 12)
    assert integerize_allocation([48.6, 24.3, 16.2, 10.9], 100).counts == (49, 24, 16, 11)


def test_integerize_overrun():
    plan = plan_from_f(10, 10, FFamily("harmonic"))
    assert plan.counts[:3] == (3, 1, 1) and plan.actual_total == 12
    assert plan.overrun and plan.budget == 10


def test_integerize_targets_must_sum():
    with pytest.raises(AllocationError):
        integerize_allocation([1, 2], 5)


def test_plan_rejects_zero_counts():
    with pytest.raises(AllocationError):
        AllocationPlan((1, 0), 1)


def test_family_validation():
    with pytest.raises(FamilyError):
        FFamily("cubic")
    with pytest.raises(FamilyError):
        FFamily("power")
    assert FFamily.power(3).non_increasing is False
    assert FFamily.power(-0.5).non_increasing and FFamily("harmonic").non_increasing
    assert plan_from_f(5, 100, FFamily.power(2)).guaranteed is False


def test_budget_validation():
    with pytest.raises(BudgetError):
        allocate_f(3, 0, FFamily())


def test_zero_sigma_fallback_and_floor():
    assert plan_from_sigma([0, 0, 0], 9).counts == (3, 3, 3)
    assert integerize_neyman([0, 3], 9).counts == (1, 8)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 30), st.integers(1, 2000), st.floats(-3, 3))
def test_f_plan_properties(n, m, a):
    f = FFamily.power(a)
    targets = allocate_f(n, m, f)
    assert abs(targets.sum() - m) <= 1e-9 * m
    plan = plan_from_f(n, m, f)
    assert min(plan.counts) >= 1
    floors = np.maximum(1, np.floor(targets + 1e-9 * m)).sum()
    assert plan.actual_total == max(m, int(floors))
    assert plan.actual_total >= max(m, n)
    w = f.weights(n)
    for j, k in itertools.combinations(range(n), 2):
        if w[j] >= w[k]:
            assert targets[j] >= targets[k] * (1 - 1e-12)
    assert plan == plan_from_f(n, m, f)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=12), st.integers(1, 500))
def test_neyman_plan_properties(sigma, m):
    if sum(sigma) == 0:
        sigma[0] = 1.0
    plan = integerize_neyman(sigma, m)
    assert plan.actual_total == max(m, len(sigma))
    assert min(plan.counts) >= 1


def _compositions(total, parts):
    for cut in itertools.combinations(range(1, total), parts - 1):
        edges = (0,) + cut + (total,)
        yield tuple(edges[i + 1] - edges[i] for i in range(parts))


def _exact_variance(sigma2, counts):
    return sum(Fraction(float(s)) / c for s, c in zip(sigma2, counts))


def _grid_optimal(sigma, m):
    sigma2 = sigma * sigma
    plan = integerize_neyman(sigma, m)
    got = _exact_variance(sigma2, plan.counts)
    best = min(_exact_variance(sigma2, c) for c in _compositions(m, len(sigma2)))
    return got == best


@pytest.mark.parametrize("game", [GloveGame(1, 2), GloveGame(2, 2), GloveGame(1, 3),
                                  SymmetricMajorityGame(4), WeightedVotingGame([3, 1, 1, 1], 4)]
                         + [RandomBoundedGame(n, seed=s) for n in (2, 3, 4) for s in range(4)],
                         ids=lambda g: f"{g.name}-{g.n}")
def test_neyman_grid_optimal_on_games(game):
    res = exact_shapley(game)
    for i in range(game.n):
        s2 = res.stratum_variances[i]
        if s2.sum() > 0:
            assert _grid_optimal(np.sqrt(s2), 12)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.floats(0, 1, allow_nan=False, allow_subnormal=False), min_size=1, max_size=4))
def test_neyman_grid_optimal_random(sigma):
    sigma = np.asarray(sigma)
    if sigma.sum() == 0:
        return
    assert _grid_optimal(sigma, 12)


def test_theoretical_variance_formula():
    assert theoretical_variance([4, 1], [2, 1]) == pytest.approx((2 + 1) / 4)
