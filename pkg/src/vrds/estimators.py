"""Permutation-sampling and stratified (VRDS) Shapley estimators.

Budget semantics follow the usual comparison: ``m`` is the number of sampled
permutations for permutation sampling, and the number of marginal samples per
player for the stratified estimator. Both give every player ``m`` marginals.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _random
from .allocation import AllocationPlan, FFamily, plan_from_f, plan_from_sigma
from .errors import AllocationError, BudgetError, ConfigError, InsufficientRepeatsError
from .game import CachedGame, CooperativeGame

PERMUTATION_CHUNK = 128
METHOD_KINDS = ("permutation", "vrds")


@dataclass
class ShapleyEstimate:
    phi_hat: np.ndarray
    utility_evals: int
    marginal_samples_per_point: int
    seed: int
    per_stratum: np.ndarray | None = None
    plans: list[AllocationPlan] | None = None


@dataclass
class RepeatedRunSummary:
    mean_phi: np.ndarray
    var_phi: np.ndarray
    per_run: np.ndarray
    seeds: list[int]
    utility_evals: int
    marginal_samples_per_point: int
    plans: list[AllocationPlan] | None = None

    @property
    def runs(self) -> int:
        return self.per_run.shape[0]

    @property
    def standard_error(self) -> np.ndarray:
        return np.sqrt(self.var_phi / self.runs)


@dataclass(frozen=True)
class Method:
    """What to run: ``permutation`` with ``m`` permutations, or ``vrds``.

    A ``vrds`` method takes its allocation from exactly one of ``plan``,
    ``sigma`` (Neyman; one row per player or a single shared row) or ``f``
    (defaults to harmonic).
    """

    kind: str
    m: int
    f: FFamily | None = None
    sigma: tuple | None = None
    plan: AllocationPlan | None = None
    cache: bool = False

    def __post_init__(self):
        if self.kind not in METHOD_KINDS:
            raise ConfigError(f"unknown method {self.kind!r}; expected one of {METHOD_KINDS}")
        if self.m < 1:
            raise BudgetError(f"budget m must be >= 1, got {self.m}")
        if self.kind == "vrds" and sum(x is not None for x in (self.f, self.sigma, self.plan)) > 1:
            raise ConfigError("give at most one of f, sigma, plan")

    def label(self) -> str:
        if self.kind == "permutation":
            return "permutation"
        if self.plan is not None:
            return "vrds(plan)"
        if self.sigma is not None:
            return "vrds(neyman)"
        f = self.f or FFamily("harmonic")
        return f"vrds(a={f.a:g})" if f.kind == "power" else f"vrds({f.kind})"

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "m": self.m, "label": self.label()}
        if self.f is not None:
            d["f"] = self.f.to_dict()
        if self.plan is not None:
            d["plan"] = list(self.plan.counts)
        if self.sigma is not None:
            d["sigma"] = np.asarray(self.sigma).tolist()
        if self.cache:
            d["cache"] = True
        return d

    @classmethod
    def vrds(cls, m: int, a: float | None = None, **kw) -> "Method":
        if a is not None:
            kw["f"] = FFamily.power(a)
        return cls("vrds", m, **kw)


def _map(fn, tasks, workers: int):
    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


# ------------------------------------------------------------ permutation sampling


def permutation_marginals(game: CooperativeGame, seed: int, perm_indices: np.ndarray) -> np.ndarray:
    """Marginal contribution of every player along each given permutation, ``(B, n)``."""
    n = game.n
    orders = _random.permutations(seed, perm_indices, n)
    ranks = np.argsort(orders, axis=1, kind="stable")
    # prefix j holds the first j players of the ordering: j = 0..n
    prefixes = ranks[:, None, :] < np.arange(n + 1)[None, :, None]
    u = game.values(prefixes.reshape(-1, n)).reshape(-1, n + 1)
    by_position = np.diff(u, axis=1)
    return np.take_along_axis(by_position, ranks, axis=1)


def permutation_shapley(game: CooperativeGame, m: int, seed: int = 0, workers: int = 1) -> ShapleyEstimate:
    """Average marginal contributions over ``m`` uniformly random orderings.

    The running-mean update is applied permutation by permutation in index
    order, so the result does not depend on ``workers``.
    """
    if m < 1:
        raise BudgetError(f"need at least one permutation, got m={m}")
    chunks = [np.arange(s, min(s + PERMUTATION_CHUNK, m)) for s in range(0, m, PERMUTATION_CHUNK)]
    parts = _map(lambda idx: permutation_marginals(game, seed, idx), chunks, workers)
    phi = np.zeros(game.n)
    t = 0
    for part in parts:
        for row in part:
            t += 1
            phi += (row - phi) / t
    return ShapleyEstimate(phi, utility_evals=m * (game.n + 1), marginal_samples_per_point=m,
                           seed=seed)


# -------------------------------------------------------------- stratified sampling


def resolve_plans(n: int, m: int | None = None, f: FFamily | None = None, sigma=None,
                  plan: AllocationPlan | None = None) -> list[AllocationPlan]:
    """One allocation plan per player."""
    if plan is not None:
        if plan.n != n:
            raise AllocationError(f"plan has {plan.n} strata but the game has {n} players")
        return [plan] * n
    if m is None:
        raise AllocationError("a budget m is needed unless an explicit plan is given")
    if sigma is not None:
        sigma = np.asarray(sigma, dtype=np.float64)
        if sigma.ndim == 1:
            sigma = np.broadcast_to(sigma, (n, n))
        if sigma.shape != (n, n):
            raise AllocationError(f"sigma must have shape ({n},) or ({n}, {n}), got {sigma.shape}")
        return [plan_from_sigma(row, m) for row in sigma]
    shared = plan_from_f(n, m, f or FFamily("harmonic"))
    return [shared] * n


def _stratum_masks(seed: int, i: int, k: int, count: int, n: int) -> np.ndarray:
    """Coalitions of size ``k`` without ``i``: all of them if there are at most ``count``."""
    if math.comb(n - 1, k) <= count:
        others = [p for p in range(n) if p != i]
        combos = list(itertools.combinations(others, k))
        masks = np.zeros((len(combos), n), dtype=bool)
        for r, c in enumerate(combos):
            masks[r, list(c)] = True
        return masks
    return _random.random_subset_masks(seed, i, k, np.arange(count), n)


def _player_strata(game: CooperativeGame, seed: int, i: int, plan: AllocationPlan):
    n = game.n
    blocks = [_stratum_masks(seed, i, k, c, n) for k, c in enumerate(plan.counts)]
    without = np.concatenate(blocks)
    with_i = without.copy()
    with_i[:, i] = True
    u = game.values(np.concatenate([with_i, without]))
    marg = u[: len(without)] - u[len(without):]
    means = np.empty(n)
    start = 0
    for k, b in enumerate(blocks):
        means[k] = marg[start:start + len(b)].mean()
        start += len(b)
    return means, 2 * len(without)


def stratified_shapley(game: CooperativeGame, m: int | None = None, f: FFamily | None = None,
                       sigma=None, plan: AllocationPlan | None = None, seed: int = 0,
                       workers: int = 1) -> ShapleyEstimate:
    """Stratified estimate: per coalition size ``k``, average ``m_k`` sampled marginals.

    Coalitions are drawn uniformly with replacement. A stratum holding no more
    coalitions than its quota is enumerated instead, which makes that stratum
    mean exact.
    """
    n = game.n
    plans = resolve_plans(n, m, f, sigma, plan)
    results = _map(lambda i: _player_strata(game, seed, i, plans[i]), list(range(n)), workers)
    per_stratum = np.stack([r[0] for r in results])
    phi = np.array([math.fsum(row) / n for row in per_stratum])
    return ShapleyEstimate(phi, utility_evals=sum(r[1] for r in results),
                           marginal_samples_per_point=max(p.actual_total for p in plans),
                           seed=seed, per_stratum=per_stratum, plans=plans)


# ------------------------------------------------------------------- dispatching


def estimate(method: Method, game: CooperativeGame, seed: int = 0, workers: int = 1) -> ShapleyEstimate:
    if method.cache:
        game = CachedGame(game)
    if method.kind == "permutation":
        return permutation_shapley(game, method.m, seed, workers)
    return stratified_shapley(game, method.m, method.f, method.sigma, method.plan, seed, workers)


def run_seed(master_seed: int, run: int) -> int:
    return _random.derive_seed(master_seed, _random.TAG_RUN, run)


def repeated_runs(method: Method, game: CooperativeGame, R: int, seed: int = 0,
                  workers: int = 1) -> RepeatedRunSummary:
    """Run ``method`` ``R`` times with seeds derived from ``seed``; across-run variance uses ``R - 1``."""
    if R < 2:
        raise InsufficientRepeatsError(f"across-run variance needs R >= 2 runs, got {R}")
    seeds = [run_seed(seed, r) for r in range(R)]
    estimates = [estimate(method, game, s, workers) for s in seeds]
    per_run = np.stack([e.phi_hat for e in estimates])
    return RepeatedRunSummary(
        mean_phi=per_run.mean(axis=0),
        var_phi=per_run.var(axis=0, ddof=1),
        per_run=per_run,
        seeds=seeds,
        utility_evals=sum(e.utility_evals for e in estimates),
        marginal_samples_per_point=estimates[0].marginal_samples_per_point,
        plans=estimates[0].plans,
    )
