"""Coalitions, cooperative games and a library of synthetic games.

Games are evaluated in batches: ``game.values(masks)`` takes a ``(B, n)``
boolean matrix whose rows are coalitions and returns ``B`` utilities. Every
row's value depends only on that row, so batching never changes a result.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _random
from .errors import GameSpecError, InvalidCoalitionError, PreconditionError

RANDOM_GAME_MAX_PLAYERS = 24


@dataclass(frozen=True)
class Coalition:
    """A set of player indices kept in ascending order."""

    members: tuple[int, ...] = ()

    def __post_init__(self):
        members = tuple(sorted(int(m) for m in self.members))
        if len(set(members)) != len(members):
            raise InvalidCoalitionError(f"duplicate player index in {self.members!r}")
        if members and members[0] < 0:
            raise InvalidCoalitionError(f"negative player index in {self.members!r}")
        object.__setattr__(self, "members", members)

    @classmethod
    def of(cls, members: Iterable[int] = (), n: int | None = None) -> "Coalition":
        c = cls(tuple(members))
        if n is not None:
            c.validate(n)
        return c

    @classmethod
    def from_mask(cls, mask: Sequence[bool]) -> "Coalition":
        return cls(tuple(int(i) for i in np.flatnonzero(np.asarray(mask, dtype=bool))))

    def validate(self, n: int) -> None:
        if self.members and self.members[-1] >= n:
            raise InvalidCoalitionError(
                f"player index {self.members[-1]} out of range for a game with {n} players")

    def mask(self, n: int) -> np.ndarray:
        self.validate(n)
        m = np.zeros(n, dtype=bool)
        m[list(self.members)] = True
        return m

    def with_player(self, i: int) -> "Coalition":
        if i in self.members:
            raise PreconditionError(f"player {i} already in coalition {self.members}")
        return Coalition(self.members + (int(i),))

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, i) -> bool:
        return int(i) in self.members

    def __iter__(self):
        return iter(self.members)


def as_coalition(S, n: int) -> Coalition:
    c = S if isinstance(S, Coalition) else Coalition(tuple(S))
    c.validate(n)
    return c


def bit_indices(masks: np.ndarray) -> np.ndarray:
    """Integer subset index (bit ``i`` set iff player ``i`` present) for each row."""
    masks = np.asarray(masks, dtype=bool)
    weights = np.left_shift(np.int64(1), np.arange(masks.shape[1], dtype=np.int64))
    return masks.astype(np.int64) @ weights


class CooperativeGame:
    """A player count, a deterministic utility and bounds on its values.

    Subclasses override :meth:`_values`; the plain constructor wraps an
    arbitrary ``utility(Coalition) -> float`` callable.
    """

    def __init__(self, n: int, utility: Callable[[Coalition], float] | None = None,
                 utility_range: tuple[float, float] = (-np.inf, np.inf), name: str = "custom"):
        if n < 1:
            raise GameSpecError("a game needs at least one player")
        self.n = int(n)
        self._utility = utility
        self.utility_range = (float(utility_range[0]), float(utility_range[1]))
        self.name = name

    @property
    def marginal_range(self) -> float:
        lo, hi = self.utility_range
        return hi - lo

    def values(self, masks: np.ndarray) -> np.ndarray:
        masks = np.asarray(masks, dtype=bool)
        if masks.ndim != 2 or masks.shape[1] != self.n:
            raise InvalidCoalitionError(f"expected masks of shape (B, {self.n}), got {masks.shape}")
        if masks.shape[0] == 0:
            return np.zeros(0)
        return np.asarray(self._values(masks), dtype=np.float64)

    def _values(self, masks: np.ndarray) -> np.ndarray:
        if self._utility is None:
            raise NotImplementedError
        return np.array([float(self._utility(Coalition.from_mask(row))) for row in masks])

    def value(self, S) -> float:
        return float(self.values(as_coalition(S, self.n).mask(self.n)[None, :])[0])

    def empty_value(self) -> float:
        return float(self.values(np.zeros((1, self.n), dtype=bool))[0])

    def grand_value(self) -> float:
        return float(self.values(np.ones((1, self.n), dtype=bool))[0])

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name={self.name!r}, n={self.n})"


def evaluate_utility(game: CooperativeGame, S) -> float:
    return game.value(S)


def marginal_contribution(game: CooperativeGame, i: int, S) -> float:
    """``U(S + {i}) - U(S)``; ``i`` must not already be in ``S``."""
    S = as_coalition(S, game.n)
    if not 0 <= i < game.n:
        raise InvalidCoalitionError(f"player {i} out of range for n={game.n}")
    if i in S:
        raise PreconditionError(f"player {i} is already a member of {S.members}")
    both = np.stack([S.with_player(i).mask(game.n), S.mask(game.n)])
    hi, lo = game.values(both)
    return float(hi - lo)


class NormalizedGame(CooperativeGame):
    """``U(S) - U(empty)``: same marginals, zero value on the empty coalition."""

    def __init__(self, base: CooperativeGame):
        self.base = base
        self.offset = base.empty_value()
        lo, hi = base.utility_range
        super().__init__(base.n, utility_range=(lo - self.offset, hi - self.offset),
                         name=base.name)

    def _values(self, masks):
        return self.base.values(masks) - self.offset


def normalize_utility(game: CooperativeGame) -> CooperativeGame:
    if isinstance(game, NormalizedGame):
        return game
    return NormalizedGame(game)


class SumGame(CooperativeGame):
    """Pointwise sum ``(U + V)(S) = U(S) + V(S)``, used by the additivity check."""

    def __init__(self, u: CooperativeGame, v: CooperativeGame):
        if u.n != v.n:
            raise GameSpecError("summed games must have the same player count")
        self.u, self.v = u, v
        super().__init__(u.n, utility_range=(u.utility_range[0] + v.utility_range[0],
                                             u.utility_range[1] + v.utility_range[1]),
                         name=f"{u.name}+{v.name}")

    def _values(self, masks):
        return self.u.values(masks) + self.v.values(masks)


class CachedGame(CooperativeGame):
    """Coalition-keyed memo in front of an expensive game.

    Concurrent first evaluations of one coalition may both compute it; the base
    game is pure, so whichever write lands is the same value.
    """

    def __init__(self, base: CooperativeGame):
        self.base = base
        self._memo: dict[bytes, float] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        super().__init__(base.n, utility_range=base.utility_range, name=base.name)

    def _values(self, masks):
        keys = [row.tobytes() for row in np.packbits(masks, axis=1)]
        out = np.empty(len(keys))
        todo = []
        with self._lock:
            for r, key in enumerate(keys):
                v = self._memo.get(key)
                if v is None:
                    todo.append(r)
                else:
                    out[r] = v
            self.hits += len(keys) - len(todo)
            self.misses += len(todo)
        if todo:
            fresh = self.base.values(masks[todo])
            out[todo] = fresh
            with self._lock:
                for r, v in zip(todo, fresh):
                    self._memo.setdefault(keys[r], float(v))
        return out


# ---------------------------------------------------------------- synthetic games


class AdditiveGame(CooperativeGame):
    def __init__(self, weights: Sequence[float]):
        self.weights = np.asarray(weights, dtype=np.float64)
        if self.weights.ndim != 1 or self.weights.size == 0:
            raise GameSpecError("additive game needs a non-empty weight vector")
        super().__init__(self.weights.size,
                         utility_range=(float(self.weights[self.weights < 0].sum()),
                                        float(self.weights[self.weights > 0].sum())),
                         name="additive")

    def _values(self, masks):
        # row-wise sum over a fixed-length axis: independent of batch shape
        return np.where(masks, self.weights, 0.0).sum(axis=1)


class GloveGame(CooperativeGame):
    """Players ``0..n_left-1`` hold left gloves, the rest right gloves.

    A coalition is worth the number of matched pairs it can form.
    """

    def __init__(self, n_left: int = 1, n_right: int = 2):
        if n_left < 1 or n_right < 1:
            raise GameSpecError("glove game needs at least one left and one right glove")
        self.n_left, self.n_right = int(n_left), int(n_right)
        super().__init__(n_left + n_right, utility_range=(0.0, float(min(n_left, n_right))),
                         name="glove")

    def _values(self, masks):
        left = masks[:, : self.n_left].sum(axis=1)
        right = masks[:, self.n_left:].sum(axis=1)
        return np.minimum(left, right).astype(np.float64)


class WeightedVotingGame(CooperativeGame):
    def __init__(self, weights: Sequence[float], quota: float):
        self.weights = np.asarray(weights, dtype=np.float64)
        if self.weights.ndim != 1 or self.weights.size == 0 or np.any(self.weights < 0):
            raise GameSpecError("weighted voting needs non-negative weights")
        if not 0 < quota <= self.weights.sum():
            raise GameSpecError(f"quota {quota} must lie in (0, total weight {self.weights.sum()}]")
        self.quota = float(quota)
        super().__init__(self.weights.size, utility_range=(0.0, 1.0), name="weighted-voting")

    def _values(self, masks):
        return (np.where(masks, self.weights, 0.0).sum(axis=1) >= self.quota).astype(np.float64)


class SymmetricMajorityGame(CooperativeGame):
    def __init__(self, n: int, threshold: int | None = None):
        threshold = n // 2 + 1 if threshold is None else int(threshold)
        if not 1 <= threshold <= n:
            raise GameSpecError(f"threshold {threshold} must lie in [1, {n}]")
        self.threshold = threshold
        super().__init__(n, utility_range=(0.0, 1.0), name="symmetric-majority")

    def _values(self, masks):
        return (masks.sum(axis=1) >= self.threshold).astype(np.float64)


class RandomBoundedGame(CooperativeGame):
    """Each coalition gets one uniform draw from ``[low, high]``, fixed by the seed.

    The whole table of ``2**n`` values is drawn once at construction, which
    makes evaluation a lookup and concurrent use trivially race-free.
    """

    def __init__(self, n: int, low: float = 0.0, high: float = 1.0, seed: int = 0):
        if n > RANDOM_GAME_MAX_PLAYERS:
            raise GameSpecError(f"random-bounded games support at most {RANDOM_GAME_MAX_PLAYERS} players")
        if not low <= high:
            raise GameSpecError("random-bounded game needs low <= high")
        self.seed = int(seed)
        u = _random.uniform01(seed, _random.TAG_GAME, np.arange(1 << n, dtype=np.int64))
        self.table = low + (high - low) * u
        super().__init__(n, utility_range=(float(low), float(high)), name="random-bounded")

    def _values(self, masks):
        return self.table[bit_indices(masks)]


class TableGame(CooperativeGame):
    """A game given by an explicit table of ``2**n`` values indexed by bit pattern."""

    def __init__(self, table: Sequence[float], name: str = "table"):
        table = np.asarray(table, dtype=np.float64)
        n = int(round(np.log2(table.size)))
        if table.ndim != 1 or table.size != 1 << n:
            raise GameSpecError("table length must be a power of two")
        self.table = table
        super().__init__(n, utility_range=(float(table.min()), float(table.max())), name=name)

    def _values(self, masks):
        return self.table[bit_indices(masks)]


SYNTHETIC_KINDS = ("additive", "glove", "weighted-voting", "symmetric-majority", "random-bounded")


@dataclass(frozen=True)
class SyntheticGameSpec:
    kind: str
    parameters: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "parameters": dict(self.parameters)}


def make_synthetic_game(spec: SyntheticGameSpec) -> CooperativeGame:
    p = dict(spec.parameters)
    try:
        if spec.kind == "additive":
            return AdditiveGame(p.get("weights", (1.0, 2.0, 3.0)))
        if spec.kind == "glove":
            return GloveGame(p.get("n_left", 1), p.get("n_right", 2))
        if spec.kind == "weighted-voting":
            return WeightedVotingGame(p["weights"], p["quota"])
        if spec.kind == "symmetric-majority":
            return SymmetricMajorityGame(p["n"], p.get("threshold"))
        if spec.kind == "random-bounded":
            return RandomBoundedGame(p["n"], p.get("low", 0.0), p.get("high", 1.0), p.get("seed", 0))
    except KeyError as exc:
        raise GameSpecError(f"{spec.kind} game is missing parameter {exc}") from None
    raise GameSpecError(f"unknown synthetic game kind {spec.kind!r}; expected one of {SYNTHETIC_KINDS}")
