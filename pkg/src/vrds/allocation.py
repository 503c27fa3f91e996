"""Distributing a per-player sample budget over coalition-size strata."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .errors import AllocationError, BudgetError, DegenerateAllocationError, FamilyError

FAMILY_KINDS = ("constant", "harmonic", "power")


@dataclass(frozen=True)
class FFamily:
    """Stratum weight ``f(k)``: constant, ``1/(k+1)``, or ``(k+1)**a``."""

    kind: str = "harmonic"
    a: float | None = None

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise FamilyError(f"unknown f family {self.kind!r}; expected one of {FAMILY_KINDS}")
        if self.kind == "power":
            if self.a is None or not math.isfinite(self.a):
                raise FamilyError("power family needs a finite exponent a")

    @classmethod
    def power(cls, a: float) -> "FFamily":
        return cls("power", float(a))

    def __call__(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=np.float64)
        if self.kind == "constant":
            return np.ones_like(k)
        if self.kind == "harmonic":
            return 1.0 / (k + 1.0)
        return (k + 1.0) ** self.a

    def weights(self, n: int) -> np.ndarray:
        w = self(np.arange(n))
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise FamilyError(f"f must be positive and finite on [0, {n - 1}]")
        return w

    @property
    def non_increasing(self) -> bool:
        """Whether the f-proportional allocation carries its variance guarantee."""
        return self.kind != "power" or self.a <= 0

    def label(self) -> str:
        if self.kind == "power":
            return f"power(a={self.a:g})"
        return self.kind

    def to_dict(self) -> dict:
        return {"kind": self.kind, "a": self.a}

    @classmethod
    def from_dict(cls, d: dict) -> "FFamily":
        return cls(d["kind"], d.get("a"))


@dataclass(frozen=True)
class AllocationPlan:
    counts: tuple[int, ...]
    budget: int
    targets: tuple[float, ...] | None = None
    guaranteed: bool = True

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if not counts:
            raise AllocationError("an allocation needs at least one stratum")
        if min(counts) < 1:
            raise AllocationError(f"every stratum needs at least one sample, got {counts}")
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return len(self.counts)

    @property
    def actual_total(self) -> int:
        return sum(self.counts)

    @property
    def overrun(self) -> bool:
        return self.actual_total > self.budget

    def to_dict(self) -> dict:
        return {"counts": list(self.counts), "budget": self.budget,
                "actual_total": self.actual_total, "overrun": self.overrun,
                "guaranteed": self.guaranteed}


def allocate_neyman(sigma, m: float) -> np.ndarray:
    """Targets proportional to the stratum standard deviations."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if m < 1:
        raise BudgetError(f"budget must be >= 1, got {m}")
    if np.any(sigma < 0) or not np.all(np.isfinite(sigma)):
        raise AllocationError("standard deviations must be finite and non-negative")
    total = math.fsum(sigma)
    if total == 0:
        raise DegenerateAllocationError("all stratum standard deviations are zero")
    return m * sigma / total


def allocate_f(n: int, m: float, f: FFamily) -> np.ndarray:
    if n < 1:
        raise AllocationError("need at least one stratum")
    if m < 1:
        raise BudgetError(f"budget must be >= 1, got {m}")
    w = f.weights(n)
    return m * w / math.fsum(w)


def integerize_allocation(targets, m: int) -> AllocationPlan:
    """Round real targets to counts of at least one, topping up by largest remainder.

    Leftover samples go one each to the strata with the largest ``target - count``,
    ties broken toward smaller ``k``. If the one-sample floor alone exceeds ``m``
    the plan overruns the budget (``plan.overrun``).
    """
    targets = np.asarray(targets, dtype=np.float64)
    m = int(m)
    if abs(math.fsum(targets) - m) > 1e-9 * max(1.0, m):
        raise AllocationError(f"targets sum to {math.fsum(targets)}, not the budget {m}")
    # snap values like 23.999999999999996 to the integer they represent
    counts = np.maximum(1, np.floor(targets + 1e-9 * max(1.0, m)).astype(np.int64))
    leftover = m - int(counts.sum())
    if leftover > 0:
        remainder = targets - counts
        order = sorted(range(targets.size), key=lambda k: (-remainder[k], k))
        for k in order[:leftover]:
            counts[k] += 1
    return AllocationPlan(tuple(counts), m, tuple(targets.tolist()))


def plan_from_f(n: int, m: int, f: FFamily) -> AllocationPlan:
    plan = integerize_allocation(allocate_f(n, m, f), m)
    return AllocationPlan(plan.counts, plan.budget, plan.targets, guaranteed=f.non_increasing)


def integerize_neyman(sigma, m: int) -> AllocationPlan:
    """Integer Neyman plan minimising ``sum_k sigma_k^2 / m_k`` exactly.

    Every stratum starts at one sample; the remaining ``max(m, n) - n`` samples
    are added one at a time where they cut the variance most (ties to smaller
    ``k``). For a separable convex objective this greedy is the integer optimum,
    which plain rounding of the real-valued targets is not.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    targets = allocate_neyman(sigma, m)
    n = sigma.size
    s2 = sigma * sigma
    counts = [1] * n
    heap = [(-s2[k] / 2.0, k) for k in range(n)]
    heapq.heapify(heap)
    for _ in range(max(int(m), n) - n):
        _, k = heapq.heappop(heap)
        counts[k] += 1
        c = counts[k]
        heapq.heappush(heap, (-s2[k] / (c * (c + 1.0)), k))
    return AllocationPlan(tuple(counts), int(m), tuple(targets.tolist()))


def plan_from_sigma(sigma, m: int, fallback: FFamily = FFamily("constant")) -> AllocationPlan:
    """Neyman plan; all-zero ``sigma`` falls back to the ``fallback`` family."""
    try:
        return integerize_neyman(sigma, m)
    except DegenerateAllocationError:
        return plan_from_f(len(sigma), m, fallback)


def theoretical_variance(sigma2, counts) -> float:
    """``(1/n^2) * sum_k sigma_k^2 / m_k`` for independent stratum means."""
    sigma2 = np.asarray(sigma2, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)
    n = sigma2.size
    return math.fsum(sigma2 / counts) / (n * n)
