"""Brute-force Shapley values, per-stratum statistics and axiom checks for small games."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError, SizeCapError
from .game import CooperativeGame, SumGame

DEFAULT_CAP = 20
_CHUNK = 1 << 14


def _check_cap(game: CooperativeGame, cap: int) -> None:
    if game.n > cap:
        raise SizeCapError(f"exact computation needs 2^{game.n} evaluations; "
                           f"n={game.n} exceeds the cap of {cap}")


def all_masks(n: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    idx = np.arange(start, (1 << n) if stop is None else stop, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(bool)


def utility_table(game: CooperativeGame, cap: int = DEFAULT_CAP, workers: int = 1) -> np.ndarray:
    """Values of all ``2**n`` coalitions, indexed by bit pattern."""
    _check_cap(game, cap)
    total = 1 << game.n
    bounds = [(s, min(s + _CHUNK, total)) for s in range(0, total, _CHUNK)]

    def run(b):
        return game.values(all_masks(game.n, *b))

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, bounds))
    else:
        parts = [run(b) for b in bounds]
    return np.concatenate(parts)


def _popcount(idx: np.ndarray) -> np.ndarray:
    bits = np.unpackbits(idx.astype("<u8").view(np.uint8).reshape(-1, 8), axis=1)
    return bits.sum(axis=1)


@dataclass
class ExactShapleyResult:
    phi: np.ndarray
    stratum_means: np.ndarray
    stratum_variances: np.ndarray
    stratum_ranges: np.ndarray
    grand_value: float
    empty_value: float

    @property
    def n(self) -> int:
        return self.phi.size

    def to_dict(self) -> dict:
        return {
            "phi": self.phi.tolist(),
            "stratum_means": self.stratum_means.tolist(),
            "stratum_variances": self.stratum_variances.tolist(),
            "stratum_ranges": self.stratum_ranges.tolist(),
            "grand_value": self.grand_value,
            "empty_value": self.empty_value,
        }


def _player_strata(table: np.ndarray, n: int, i: int, pop: np.ndarray):
    bit = 1 << i
    idx = np.arange(1 << n, dtype=np.int64)
    without = idx[(idx & bit) == 0]
    marg = table[without | bit] - table[without]
    sizes = pop[without]
    order = np.argsort(sizes, kind="stable")
    groups = np.split(marg[order], np.cumsum(np.bincount(sizes, minlength=n))[:-1])
    means = np.empty(n)
    variances = np.empty(n)
    ranges = np.empty(n)
    for k, g in enumerate(groups):
        # group size is C(n-1, k), exact in integers
        count = math.comb(n - 1, k)
        mean = math.fsum(g) / count
        means[k] = mean
        variances[k] = math.fsum((g - mean) ** 2) / count
        ranges[k] = g.max() - g.min()
    return means, variances, ranges


def exact_shapley(game: CooperativeGame, cap: int = DEFAULT_CAP, workers: int = 1,
                  table: np.ndarray | None = None) -> ExactShapleyResult:
    """Exact values by enumerating every coalition.

    Marginal contributions do not depend on ``U(empty)``, so the result is that
    of the normalized game and efficiency reads ``sum(phi) = U(N) - U(empty)``.
    """
    n = game.n
    if table is None:
        table = utility_table(game, cap, workers)
    pop = _popcount(np.arange(1 << n, dtype=np.int64))
    means = np.empty((n, n))
    variances = np.empty((n, n))
    ranges = np.empty((n, n))
    for i in range(n):
        means[i], variances[i], ranges[i] = _player_strata(table, n, i, pop)
    phi = np.array([math.fsum(row) / n for row in means])
    return ExactShapleyResult(phi, means, variances, ranges,
                              grand_value=float(table[-1]), empty_value=float(table[0]))


def exact_stratum_stats(game: CooperativeGame, i: int, cap: int = DEFAULT_CAP):
    """Per-stratum mean and population variance of player ``i``'s marginals."""
    if not 0 <= i < game.n:
        raise PreconditionError(f"player {i} out of range")
    table = utility_table(game, cap)
    pop = _popcount(np.arange(1 << game.n, dtype=np.int64))
    means, variances, _ = _player_strata(table, game.n, i, pop)
    return means, variances


def shapley_by_permutations(game: CooperativeGame, max_players: int = 9) -> np.ndarray:
    """Average marginal contribution over all ``n!`` orderings."""
    n = game.n
    if n > max_players:
        raise SizeCapError(f"{n}! permutations exceeds the enumeration limit ({max_players}!)")
    table = utility_table(game, cap=max_players)
    sums = [[] for _ in range(n)]
    for order in itertools.permutations(range(n)):
        prefix = 0
        for p in order:
            sums[p].append(table[prefix | (1 << p)] - table[prefix])
            prefix |= 1 << p
    count = math.factorial(n)
    return np.array([math.fsum(s) / count for s in sums])


@dataclass
class AxiomCheck:
    name: str
    passed: bool
    residual: float
    detail: dict = field(default_factory=dict)


@dataclass
class AxiomReport:
    checks: list[AxiomCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> AxiomCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {c.name: {"passed": c.passed, "residual": c.residual, **c.detail} for c in self.checks}


def symmetric_pairs(table: np.ndarray, n: int, tol: float = 1e-12) -> list[tuple[int, int]]:
    idx = np.arange(1 << n, dtype=np.int64)
    pairs = []
    for i, j in itertools.combinations(range(n), 2):
        rest = idx[(idx & ((1 << i) | (1 << j))) == 0]
        if np.all(np.abs(table[rest | (1 << i)] - table[rest | (1 << j)]) <= tol):
            pairs.append((i, j))
    return pairs


def dummy_players(table: np.ndarray, n: int, tol: float = 1e-12) -> list[int]:
    idx = np.arange(1 << n, dtype=np.int64)
    out = []
    for i in range(n):
        rest = idx[(idx & (1 << i)) == 0]
        if np.all(np.abs(table[rest | (1 << i)] - table[rest]) <= tol):
            out.append(i)
    return out


def check_axioms(game: CooperativeGame, phi, partner: CooperativeGame | None = None,
                 tol: float = 1e-9, cap: int = DEFAULT_CAP) -> AxiomReport:
    """Check a value vector against efficiency, symmetry, dummy and additivity.

    Additivity needs a second game ``partner`` (V); it compares the exact values of
    ``U + V`` with ``phi + phi_exact(V)``. Without a partner it is reported as
    passed with residual 0 and ``"skipped": True``.
    """
    phi = np.asarray(phi, dtype=np.float64)
    n = game.n
    if phi.shape != (n,):
        raise PreconditionError(f"phi must have length {n}")
    table = utility_table(game, cap)
    checks = []

    eff = abs(math.fsum(phi) - (table[-1] - table[0]))
    checks.append(AxiomCheck("efficiency", eff <= tol, float(eff)))

    pairs = symmetric_pairs(table, n)
    sym = max((abs(phi[i] - phi[j]) for i, j in pairs), default=0.0)
    checks.append(AxiomCheck("symmetry", sym <= tol, float(sym), {"pairs": pairs}))

    dummies = dummy_players(table, n)
    dum = max((abs(phi[i]) for i in dummies), default=0.0)
    checks.append(AxiomCheck("dummy", dum <= tol, float(dum), {"players": dummies}))

    if partner is None:
        checks.append(AxiomCheck("additivity", True, 0.0, {"skipped": True}))
    else:
        phi_v = exact_shapley(partner, cap).phi
        phi_uv = exact_shapley(SumGame(game, partner), cap).phi
        add = float(np.max(np.abs(phi_uv - phi - phi_v)))
        checks.append(AxiomCheck("additivity", add <= tol, add, {"skipped": False}))
    return AxiomReport(checks)
