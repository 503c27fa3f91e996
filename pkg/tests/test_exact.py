import itertools
import math

import numpy as np
import pytest

from conftest import hand_shapley, small_suite
from vrds.errors import PreconditionError, SizeCapError
from vrds.exact import (check_axioms, exact_shapley, exact_stratum_stats, shapley_by_permutations,
                        utility_table)
from vrds.game import AdditiveGame, RandomBoundedGame, SymmetricMajorityGame, TableGame


def test_glove_exact(glove):
    assert np.allclose(exact_shapley(glove).phi, [2 / 3, 1 / 6, 1 / 6], atol=1e-12, rtol=0)


def test_additive_exact(additive):
    assert np.allclose(exact_shapley(additive).phi, [1, 2, 3], atol=1e-12, rtol=0)


def test_majority_exact():
    assert np.allclose(exact_shapley(SymmetricMajorityGame(3)).phi, 1 / 3, atol=1e-12)


@pytest.mark.parametrize("game", small_suite(), ids=lambda g: f"{g.name}-{g.n}")
def test_matches_hand_permutation_oracle(game):
    assert np.allclose(exact_shapley(game).phi, hand_shapley(game), atol=1e-12, rtol=0)


def test_glove_stratum_stats(glove):
    means, variances = exact_stratum_stats(glove, 0)
    assert np.allclose(means, [0, 1, 1])
    means, variances = exact_stratum_stats(glove, 1)
    assert means[1] == pytest.approx(0.5) and variances[1] == pytest.approx(0.25)


def test_additive_strata_have_zero_variance(additive):
    res = exact_shapley(additive)
    assert np.all(res.stratum_variances == 0)


def _brute_strata(game, i):
    n = game.n
    others = [p for p in range(n) if p != i]
    means, variances, ranges = [], [], []
    for k in range(n):
        marg = [game.value(list(S) + [i]) - game.value(S) for S in itertools.combinations(others, k)]
        means.append(np.mean(marg))
        variances.append(np.var(marg))
        ranges.append(max(marg) - min(marg))
    return np.array(means), np.array(variances), np.array(ranges)


@pytest.mark.parametrize("game", small_suite(), ids=lambda g: f"{g.name}-{g.n}")
def test_strata_against_direct_enumeration(game):
    res = exact_shapley(game)
    for i in range(game.n):
        m, v, r = _brute_strata(game, i)
        assert np.allclose(res.stratum_means[i], m, atol=1e-12)
        assert np.allclose(res.stratum_variances[i], v, atol=1e-12)
        assert np.allclose(res.stratum_ranges[i], r, atol=1e-12)
        assert abs(math.fsum(res.stratum_means[i]) / game.n - res.phi[i]) <= 1e-12


@pytest.mark.parametrize("game", small_suite(), ids=lambda g: f"{g.name}-{g.n}")
def test_variance_range_bound(game):
    res = exact_shapley(game)
    assert np.all(res.stratum_variances <= res.stratum_ranges ** 2 / 4 + 1e-15)


def test_efficiency_invariant():
    for seed in range(10):
        g = RandomBoundedGame(6, seed=seed)
        res = exact_shapley(g)
        assert abs(res.phi.sum() - (g.grand_value() - g.empty_value())) <= 1e-9


@pytest.mark.parametrize("n", range(1, 7))
def test_permutation_identity(n):
    g = RandomBoundedGame(n, seed=100 + n)
    assert np.allclose(shapley_by_permutations(g), exact_shapley(g).phi, atol=1e-12, rtol=0)


def test_cap():
    with pytest.raises(SizeCapError):
        exact_shapley(AdditiveGame(np.ones(21)))
    with pytest.raises(SizeCapError):
        exact_shapley(AdditiveGame(np.ones(6)), cap=5)


def test_worker_partitioning_is_invisible():
    g = RandomBoundedGame(16, seed=4)
    a = exact_shapley(g, workers=1)
    b = exact_shapley(g, workers=4)
    assert a.phi.tobytes() == b.phi.tobytes()
    assert np.array_equal(utility_table(g, workers=1), utility_table(g, workers=3))


def test_axioms_exact_pass():
    for seed in range(5):
        g = RandomBoundedGame(6, seed=seed)
        report = check_axioms(g, exact_shapley(g).phi, partner=RandomBoundedGame(6, seed=seed + 50))
        assert report.passed
        assert all(c.residual <= 1e-9 for c in report.checks)


def test_efficiency_failure_residual(additive):
    report = check_axioms(additive, [1.1, 2, 3])
    assert not report["efficiency"].passed
    assert report["efficiency"].residual == pytest.approx(0.1)


def test_glove_symmetry_pair(glove):
    report = check_axioms(glove, exact_shapley(glove).phi)
    assert (1, 2) in report["symmetry"].detail["pairs"]
    assert report["symmetry"].residual <= 1e-12


def test_dummy_detected():
    g = AdditiveGame([1.0, 0.0, 2.0])
    report = check_axioms(g, [1.0, 0.3, 2.0 - 0.3])
    assert report["dummy"].detail["players"] == [1]
    assert not report["dummy"].passed


def test_additivity_failure():
    u, v = RandomBoundedGame(4, seed=1), RandomBoundedGame(4, seed=2)
    phi = exact_shapley(u).phi + np.array([0.01, -0.01, 0, 0])
    assert not check_axioms(u, phi, partner=v)["additivity"].passed


def test_phi_length_checked(additive):
    with pytest.raises(PreconditionError):
        check_axioms(additive, [1, 2])


def test_table_game_roundtrip():
    t = np.arange(8, dtype=float)
    g = TableGame(t)
    # U(S) = bit pattern: additive with weights 1, 2, 4
    assert np.allclose(exact_shapley(g).phi, [1, 2, 4])
