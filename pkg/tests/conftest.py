import itertools

import numpy as np
import pytest

from vrds.game import AdditiveGame, GloveGame, RandomBoundedGame, SymmetricMajorityGame, WeightedVotingGame


def all_subsets(n):
    for k in range(n + 1):
        yield from itertools.combinations(range(n), k)


def hand_shapley(game):
    """Oracle: Shapley values from the permutation definition, no shared code path."""
    n = game.n
    phi = np.zeros(n)
    perms = list(itertools.permutations(range(n)))
    for order in perms:
        prefix = []
        for p in order:
            phi[p] += game.value(prefix + [p]) - game.value(prefix)
            prefix.append(p)
    return phi / len(perms)


@pytest.fixture
def glove():
    return GloveGame(1, 2)


@pytest.fixture
def additive():
    return AdditiveGame([1.0, 2.0, 3.0])


def small_suite():
    """A handful of small games covering every synthetic kind."""
    return [
        AdditiveGame([1.0, 2.0, 3.0]),
        GloveGame(1, 2),
        GloveGame(2, 3),
        SymmetricMajorityGame(3),
        SymmetricMajorityGame(6),
        WeightedVotingGame([4, 2, 1, 1], 5),
        RandomBoundedGame(5, seed=3),
        RandomBoundedGame(7, -1.0, 2.0, seed=11),
    ]


ACCEPTANCE_LINES: list[str] = []


def record(number, passed: bool, detail: str) -> bool:
    ACCEPTANCE_LINES.append(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
