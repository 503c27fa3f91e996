"""Sample sizes guaranteeing an (epsilon, delta)-approximation, and an empirical check.

All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .allocation import FFamily
from .errors import DomainError, OracleError, PreconditionError
from .estimators import Method, estimate, run_seed
from .game import CooperativeGame


@dataclass(frozen=True)
class ApproximationSpec:
    epsilon: float
    delta: float
    r: float = 1.0
    n: int = 1

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise DomainError(f"delta must lie in (0, 1), got {self.delta}")
        if not (self.r >= 0 and math.isfinite(self.r)):
            raise DomainError(f"range r must be non-negative, got {self.r}")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n}")


def _ceil_at_least_one(x: float) -> int:
    return max(1, math.ceil(x))


def permutation_sample_bound(spec: ApproximationSpec) -> int:
    """Permutations needed by Hoeffding: ``ceil(r^2 ln(2/delta) / (2 eps^2))``."""
    return _ceil_at_least_one(spec.r ** 2 * math.log(2 / spec.delta) / (2 * spec.epsilon ** 2))


def stratified_bound_terms(spec: ApproximationSpec, f: FFamily) -> tuple[float, float]:
    """The two real-valued lower bounds whose maximum is the stratified sample size."""
    try:
        w = f.weights(spec.n)
    except Exception as exc:
        raise DomainError(str(exc)) from None
    log_term = math.log(2 / spec.delta)
    eps2n2 = spec.epsilon ** 2 * spec.n ** 2
    total = math.fsum(w)
    first = 16 * log_term / (17 * eps2n2) * math.fsum(1.0 / w) * total
    second = 2 * log_term / (eps2n2 * w[-1] ** 2) * total ** 2
    return first, second


def stratified_sample_bound(spec: ApproximationSpec, f: FFamily) -> int:
    return _ceil_at_least_one(max(stratified_bound_terms(spec, f)))


def stratified_sample_bound_harmonic(spec: ApproximationSpec) -> int:
    """Closed form for ``f(k) = 1/(k+1)``: ``ceil(2 ln(2/delta) / eps^2 * (ln n + 1)^2)``."""
    return _ceil_at_least_one(2 * math.log(2 / spec.delta) / spec.epsilon ** 2
                              * (math.log(spec.n) + 1) ** 2)


def prescribed_budget(method_kind: str, spec: ApproximationSpec, f: FFamily | None = None) -> int:
    if method_kind == "permutation":
        return permutation_sample_bound(spec)
    f = f or FFamily("harmonic")
    return stratified_sample_bound(spec, f)


@dataclass
class ExceedanceResult:
    m: int
    trials: int
    fraction: np.ndarray
    delta: float

    @property
    def noise_margin(self) -> float:
        return 2 * math.sqrt(self.delta * (1 - self.delta) / self.trials)

    @property
    def sound(self) -> bool:
        return bool(np.all(self.fraction <= self.delta + self.noise_margin))


def empirical_epsilon_delta_check(method: Method | str, game: CooperativeGame, exact_phi,
                                  spec: ApproximationSpec, trials: int = 100, seed: int = 0,
                                  f: FFamily | None = None, workers: int = 1) -> ExceedanceResult:
    """Fraction of ``trials`` runs whose estimate misses the exact value by more than epsilon.

    A string method (``"permutation"`` or ``"vrds"``) uses the bound-prescribed
    budget; a :class:`Method` is run as given.
    """
    if exact_phi is None:
        raise OracleError("exact values are required for the (epsilon, delta) check")
    exact_phi = np.asarray(exact_phi, dtype=np.float64)
    if exact_phi.shape != (game.n,):
        raise OracleError(f"exact values must have length {game.n}")
    if trials < 100:
        raise PreconditionError(f"need at least 100 trials, got {trials}")
    if isinstance(method, str):
        if method == "vrds":
            spec = replace(spec, n=game.n)
        m = prescribed_budget(method, spec, f)
        method = Method(method, m, f=f if method == "vrds" else None)
    misses = np.zeros(game.n, dtype=np.int64)
    for t in range(trials):
        est = estimate(method, game, run_seed(seed, t), workers)
        misses += np.abs(est.phi_hat - exact_phi) > spec.epsilon
    return ExceedanceResult(method.m, trials, misses / trials, spec.delta)
