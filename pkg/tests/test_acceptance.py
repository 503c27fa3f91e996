"""One test per acceptance criterion, at the stated tolerances and time limits."""

import itertools
import json
import math
import time
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from conftest import hand_shapley, record
from vrds.allocation import FFamily, integerize_neyman
from vrds.cli import main
from vrds.complexity import (ApproximationSpec, empirical_epsilon_delta_check, permutation_sample_bound,
                             stratified_sample_bound_harmonic)
from vrds.data import blobs_split, blobs_with_junk
from vrds.estimators import Method, repeated_runs
from vrds.exact import check_axioms, exact_shapley, shapley_by_permutations
from vrds.experiments import SweepGrid, removal_study, variance_study
from vrds.game import (AdditiveGame, GloveGame, RandomBoundedGame, SymmetricMajorityGame,
                       WeightedVotingGame)
from vrds.learners import LearnerSpec, accuracy_utility


def test_criterion_01_exact_oracle():
    t0 = time.perf_counter()
    glove = exact_shapley(GloveGame(1, 2)).phi
    add = exact_shapley(AdditiveGame([1, 2, 3])).phi
    ok_glove = np.max(np.abs(glove - [2 / 3, 1 / 6, 1 / 6])) <= 1e-12
    ok_add = np.max(np.abs(add - [1, 2, 3])) <= 1e-12
    worst = 0.0
    failures = 0
    rng = np.random.default_rng(2024)
    for g in range(100):
        n = int(rng.integers(1, 9))
        game = RandomBoundedGame(n, seed=g)
        partner = RandomBoundedGame(n, -0.5, 0.5, seed=1000 + g)
        rep = check_axioms(game, exact_shapley(game).phi, partner=partner)
        worst = max(worst, max(c.residual for c in rep.checks))
        failures += not rep.passed
    elapsed = time.perf_counter() - t0
    ok = ok_glove and ok_add and failures == 0 and worst <= 1e-9 and elapsed < 10
    assert record(1, ok, f"glove/additive exact; 100 random games, max axiom residual {worst:.1e}, "
                         f"{elapsed:.2f}s")


def test_criterion_02_permutation_form():
    games = [RandomBoundedGame(n, seed=s) for n in range(1, 7) for s in range(3)]
    games += [GloveGame(1, 2), GloveGame(2, 3), SymmetricMajorityGame(5), WeightedVotingGame([3, 2, 2, 1], 5)]
    worst = max(float(np.max(np.abs(shapley_by_permutations(g) - exact_shapley(g).phi))) for g in games)
    worst_hand = max(float(np.max(np.abs(hand_shapley(g) - exact_shapley(g).phi))) for g in games[:6])
    ok = worst <= 1e-12 and worst_hand <= 1e-12
    assert record(2, ok, f"n! permutation average vs subset enumeration, max diff {worst:.1e}")


def test_criterion_03_unbiasedness():
    t0 = time.perf_counter()
    fractions = {}
    for label, method in (("permutation", Method("permutation", 500)),
                          ("vrds", Method("vrds", 500, f=FFamily("harmonic")))):
        hits = total = 0
        for g in range(10):
            game = RandomBoundedGame(8, seed=300 + g)
            exact = exact_shapley(game).phi
            s = repeated_runs(method, game, 200, seed=g)
            # a fully enumerated stratum has zero sampling error; only rounding remains
            hits += int(np.sum(np.abs(s.mean_phi - exact) <= 4 * s.standard_error + 1e-12))
            total += game.n
        fractions[label] = hits / total
    elapsed = time.perf_counter() - t0
    ok = all(f >= 0.95 for f in fractions.values()) and elapsed < 300
    assert record(3, ok, "players within 4 SE: " + ", ".join(f"{k} {v:.3f}" for k, v in fractions.items())
                  + f"; {elapsed:.1f}s")


def _dominance_games():
    return ([RandomBoundedGame(n, seed=500 + n) for n in (3, 5, 8)]
            + [GloveGame(2, 3), GloveGame(1, 7), WeightedVotingGame([4, 3, 2, 1, 1, 1], 6),
               SymmetricMajorityGame(7)])


def _compositions(total, parts):
    for cut in itertools.combinations(range(1, total), parts - 1):
        edges = (0,) + cut + (total,)
        yield tuple(edges[i + 1] - edges[i] for i in range(parts))


def test_criterion_04_neyman_dominance_and_grid():
    R = 1000
    violations = []
    checked = 0
    for gi, game in enumerate(_dominance_games()):
        res = exact_shapley(game)
        sigma = np.sqrt(res.stratum_variances)
        m = 3 * game.n
        perm = repeated_runs(Method("permutation", m), game, R, seed=gi)
        strat = repeated_runs(Method("vrds", m, sigma=tuple(map(tuple, sigma))), game, R, seed=100 + gi)
        se = np.sqrt((perm.var_phi ** 2 + strat.var_phi ** 2) * 2 / (R - 1))
        for i in range(game.n):
            checked += 1
            if strat.var_phi[i] > perm.var_phi[i] + 2 * se[i]:
                violations.append((game.name, i))

    grid_cases = grid_failures = 0
    for game in [GloveGame(1, 2), GloveGame(2, 2), GloveGame(1, 3), SymmetricMajorityGame(4),
                 WeightedVotingGame([3, 1, 1, 1], 4)] + [RandomBoundedGame(n, seed=s)
                                                          for n in (2, 3, 4) for s in range(5)]:
        res = exact_shapley(game)
        for i in range(game.n):
            s2 = res.stratum_variances[i]
            if s2.sum() == 0:
                continue
            sigma = np.sqrt(s2)
            sq = [Fraction(float(x * x)) for x in sigma]
            plan = integerize_neyman(sigma, 12)
            got = sum(a / c for a, c in zip(sq, plan.counts))
            best = min(sum(a / c for a, c in zip(sq, comp)) for comp in _compositions(12, game.n))
            grid_cases += 1
            grid_failures += got != best
    ok = not violations and grid_failures == 0
    assert record(4, ok, f"dominance violations {len(violations)}/{checked} players (R={R}); "
                         f"grid-optimal {grid_cases - grid_failures}/{grid_cases}")


def test_criterion_05_variance_range_bound():
    suite = [AdditiveGame([1, 2, 3]), GloveGame(1, 2), GloveGame(2, 3), SymmetricMajorityGame(6),
             WeightedVotingGame([4, 2, 1, 1], 5)] + [RandomBoundedGame(n, seed=n) for n in range(1, 9)]
    worst = -np.inf
    for g in suite:
        res = exact_shapley(g)
        worst = max(worst, float(np.max(res.stratum_variances - res.stratum_ranges ** 2 / 4)))
    glove = exact_shapley(GloveGame(1, 2))
    equality = glove.stratum_variances[1, 1] == glove.stratum_ranges[1, 1] ** 2 / 4 == 0.25
    ok = worst <= 1e-15 and equality
    assert record(5, ok, f"max(sigma^2 - r^2/4) = {worst:.1e}; glove (R1, k=1) equality {equality}")


@pytest.fixture(scope="module")
def blobs_game():
    return accuracy_utility(blobs_split(30, 30, C=2, d=2, separation=3.0, noise=1.0, seed=0),
                            LearnerSpec("knn", k=5))


def test_criterion_06_variance_study(blobs_game):
    t0 = time.perf_counter()
    perm = repeated_runs(Method("permutation", 150), blobs_game, 10, seed=1)
    vrds = repeated_runs(Method.vrds(150, a=-1), blobs_game, 10, seed=2)
    ratio = float(np.mean(perm.var_phi) / np.mean(vrds.var_phi))
    gate = np.mean(vrds.var_phi) <= np.mean(perm.var_phi) / 5

    table = variance_study(blobs_game, SweepGrid([-2.0, -1.0, -0.5, 0.0], [100, 500, 1000],
                                                 methods=("vrds",), repeats=10, seed=3))
    wins = total = 0
    for m in (100, 500, 1000):
        for good, bad in itertools.product((-1.0, -0.5), (0.0, -2.0)):
            total += 1
            wins += table.variance("vrds", m, good) <= table.variance("vrds", m, bad)
    elapsed = time.perf_counter() - t0
    ok = bool(gate) and wins / total >= 0.7 and elapsed < 600
    assert record(6, ok, f"permutation/VRDS(a=-1) variance ratio {ratio:.2f} (gate >= 5); "
                         f"sweep wins {wins}/{total}; {elapsed:.0f}s")


def test_criterion_07_bounds():
    mpmath.mp.dps = 50
    perm = permutation_sample_bound(ApproximationSpec(0.1, 0.05, r=1))
    harm = stratified_sample_bound_harmonic(ApproximationSpec(0.1, 0.05, n=100))
    L = mpmath.log(mpmath.mpf(2) / mpmath.mpf("0.05"))
    oracle_perm = int(mpmath.ceil(L / (2 * mpmath.mpf("0.1") ** 2)))
    oracle_harm = int(mpmath.ceil(2 * L / mpmath.mpf("0.1") ** 2 * (mpmath.log(100) + 1) ** 2))
    ok = perm == 185 == oracle_perm and harm == 23180 == oracle_harm
    assert record(7, ok, f"permutation bound {perm}, harmonic bound {harm} (oracle {oracle_perm}, {oracle_harm})")


def test_criterion_08_empirical_soundness():
    game = GloveGame(1, 2)
    spec = ApproximationSpec(0.1, 0.05, r=1)
    res = empirical_epsilon_delta_check("permutation", game, exact_shapley(game).phi, spec, 500, seed=8)
    limit = 0.05 + 2 * math.sqrt(0.05 * 0.95 / 500)
    ok = res.m == 185 and bool(np.all(res.fraction <= limit))
    assert record(8, ok, f"m={res.m}, exceedance {np.round(res.fraction, 4).tolist()} <= {limit:.4f}")


def test_criterion_09_group_removal():
    t0 = time.perf_counter()
    spec = LearnerSpec("knn", k=5)
    rows = []
    for seed in range(3):
        s, groups, _ = blobs_with_junk(10, 10, 100, junk_group=0, seed=seed)
        study = removal_study(s, spec, groups, Method.vrds(500, a=-1), R=5, seed=seed)
        rows.append((study.curves["value-desc"].auc(), study.curves["random"].auc(), study.rank_of(0)))
    elapsed = time.perf_counter() - t0
    ok_auc = all(v < r for v, r, _ in rows)
    ok_rank = all(rank <= 1 for _, _, rank in rows)
    ok = ok_auc and ok_rank and elapsed < 300
    detail = "; ".join(f"AUC {v:.3f} vs random {r:.3f}, junk rank {rank}" for v, r, rank in rows)
    assert record(9, ok, f"{detail}; {elapsed:.1f}s")


COMMANDS = {
    "value": ["value", "--blobs", "n=12", "--method", "vrds", "--a", "-1", "--m", "60", "--repeats", "3"],
    "value-perm": ["value", "--blobs", "n=12", "--method", "permutation", "--m", "300", "--repeats", "3"],
    "exact": ["exact", "--blobs", "n=12"],
    "sweep": ["sweep", "--blobs", "n=10", "--a-values=-1,0", "--m-values", "20,40", "--repeats", "3"],
    "removal": ["removal", "--groups", "5", "--group-size", "6", "--n-test", "30", "--m", "40",
                "--repeats", "3", "--random-repeats", "4"],
    "bound": ["bound", "--eps", "0.1", "--delta", "0.05", "--n", "100", "--f", "harmonic"],
    "check": ["check", "--game", "glove", "--method", "vrds", "--eps", "0.2", "--delta", "0.1",
              "--trials", "100"],
}


def test_criterion_10_determinism(tmp_path, capsys):
    mismatched = []
    for name, argv in COMMANDS.items():
        bodies = []
        for attempt, workers in enumerate((1, 8, 1, 8)):
            out = tmp_path / f"{name}-{attempt}.json"
            code = main(argv + ["--seed", "5", "--workers", str(workers), "--out", str(out)])
            assert code == 0, name
            d = json.loads(out.read_text())
            d.pop("timing", None)
            bodies.append(json.dumps(d, sort_keys=True))
        if len(set(bodies)) != 1:
            mismatched.append(name)
    capsys.readouterr()
    ok = not mismatched
    assert record(10, ok, f"{len(COMMANDS)} commands x workers {{1, 8}} x 2 runs; mismatched: {mismatched or 'none'}")
