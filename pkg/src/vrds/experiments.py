"""Desk-scale studies: exact vs. estimate, variance sweeps and data-group removal."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _random
from .allocation import FFamily
from .data import GroupAssignment, TrainTestSplit
from .errors import ConfigError, InsufficientRepeatsError, SizeCapError
from .estimators import Method, RepeatedRunSummary, repeated_runs
from .exact import DEFAULT_CAP, exact_shapley
from .game import CooperativeGame
from .learners import AccuracyGame, LearnerSpec, accuracy_utility

RANKINGS = ("value-desc", "value-minus-c-variance-desc", "random")


def cell_seed(master: int, *keys) -> int:
    return _random.derive_seed(master, _random.TAG_CELL, *keys)


# ------------------------------------------------------------ exact vs. estimate


@dataclass
class ComparisonTable:
    exact: np.ndarray
    summaries: dict[str, RepeatedRunSummary]

    def rows(self) -> list[dict]:
        out = []
        for i, e in enumerate(self.exact):
            row = {"point_index": i, "exact": float(e)}
            for label, s in self.summaries.items():
                row[f"{label}_estimate"] = float(s.mean_phi[i])
                row[f"{label}_variance"] = float(s.var_phi[i])
            out.append(row)
        return out


def exact_vs_estimate(game: CooperativeGame, methods: list[Method], R: int = 5, seed: int = 0,
                      cap: int = DEFAULT_CAP, workers: int = 1) -> ComparisonTable:
    if R < 2:
        raise InsufficientRepeatsError(f"variance needs R >= 2 runs, got {R}")
    if game.n > cap:
        raise SizeCapError(f"exact values need n <= {cap}, got n={game.n}")
    exact = exact_shapley(game, cap, workers).phi
    summaries = {}
    for idx, method in enumerate(methods):
        summaries[method.label()] = repeated_runs(method, game, R, cell_seed(seed, 0, idx), workers)
    return ComparisonTable(exact, summaries)


# ------------------------------------------------------------------ variance sweep


@dataclass
class SweepGrid:
    a_values: list[float]
    m_values: list[int]
    methods: tuple[str, ...] = ("permutation", "vrds")
    repeats: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.repeats < 2:
            raise InsufficientRepeatsError(f"sweep needs repeats >= 2, got {self.repeats}")
        if not self.m_values or ("vrds" in self.methods and not self.a_values):
            raise ConfigError("sweep axes must be non-empty")
        bad = set(self.methods) - {"permutation", "vrds"}
        if bad or not self.methods:
            raise ConfigError(f"unknown sweep methods {sorted(bad)}")

    def to_dict(self) -> dict:
        return {"a_values": list(self.a_values), "m_values": list(self.m_values),
                "methods": list(self.methods), "repeats": self.repeats, "seed": self.seed}


@dataclass
class VarianceTable:
    cells: list[dict] = field(default_factory=list)
    summaries: dict[str, RepeatedRunSummary] = field(default_factory=dict)

    def variance(self, method: str, m: int, a: float | None = None) -> float:
        for c in self.cells:
            if c["method"] == method and c["m"] == m and (method == "permutation" or c["a"] == a):
                return c["mean_variance"]
        raise KeyError((method, m, a))

    def trend(self) -> dict[str, float]:
        """Spearman correlation of log-variance against log-m for every series."""
        series: dict[str, list[tuple[int, float]]] = {}
        for c in self.cells:
            series.setdefault(c["label"], []).append((c["m"], c["mean_variance"]))
        out = {}
        for label, pts in series.items():
            pts.sort()
            if len(pts) < 2:
                continue
            m, v = np.array(pts).T
            out[label] = float(stats.spearmanr(np.log(m), np.log(np.maximum(v, 1e-300)))[0])
        return out


def variance_study(game: CooperativeGame, grid: SweepGrid, workers: int = 1) -> VarianceTable:
    """Mean over points of the across-run variance, for every (method, a, m) cell."""
    table = VarianceTable()
    for mi, m in enumerate(grid.m_values):
        cells = []
        if "permutation" in grid.methods:
            cells.append(("permutation", None, Method("permutation", m), cell_seed(grid.seed, 1, mi)))
        if "vrds" in grid.methods:
            for ai, a in enumerate(grid.a_values):
                cells.append(("vrds", a, Method.vrds(m, a=a), cell_seed(grid.seed, 2, mi, ai)))
        for kind, a, method, seed in cells:
            s = repeated_runs(method, game, grid.repeats, seed, workers)
            label = method.label()
            table.summaries[f"{label},m={m}"] = s
            table.cells.append({
                "method": kind, "a": a, "m": m, "label": label,
                "mean_variance": float(np.mean(s.var_phi)),
                "utility_evals": s.utility_evals,
                "marginal_samples_per_point": s.marginal_samples_per_point,
                "repeats": grid.repeats,
                "guaranteed": None if a is None else FFamily.power(a).non_increasing,
            })
    return table


# ------------------------------------------------------------------- group games


class GroupGame(CooperativeGame):
    """Players are groups; a coalition of groups is the union of their rows."""

    def __init__(self, base: CooperativeGame, groups: GroupAssignment):
        if groups.group_of.size != base.n:
            raise ConfigError(f"group assignment covers {groups.group_of.size} points, game has {base.n}")
        self.base = base
        self.groups = groups
        super().__init__(groups.G, utility_range=base.utility_range, name=f"groups[{base.name}]")

    def _values(self, masks):
        return self.base.values(masks[:, self.groups.group_of])


def group_shapley(split: TrainTestSplit, spec: LearnerSpec, groups: GroupAssignment,
                  method: Method, R: int = 5, seed: int = 0, workers: int = 1) -> RepeatedRunSummary:
    game = GroupGame(accuracy_utility(split, spec), groups)
    return repeated_runs(method, game, R, seed, workers)


@dataclass
class RemovalCurve:
    order: list[int]
    accuracies: list[float]
    ranking: str = "value-desc"

    def auc(self) -> float:
        """Trapezoidal area under accuracy vs. fraction of groups removed."""
        acc = np.asarray(self.accuracies)
        return float(np.trapezoid(acc, dx=1.0 / (acc.size - 1)))

    def to_dict(self) -> dict:
        return {"order": list(self.order), "accuracies": list(self.accuracies),
                "ranking": self.ranking, "auc": self.auc()}


def removal_order(ranking: str, summary: RepeatedRunSummary | None, G: int, c: float = 100.0,
                  seed: int = 0) -> list[int]:
    if ranking not in RANKINGS:
        raise ConfigError(f"unknown ranking {ranking!r}; expected one of {RANKINGS}")
    if ranking == "random":
        return [int(g) for g in np.argsort(_random.hash64(seed, _random.TAG_MISC, np.arange(G)),
                                           kind="stable")]
    if summary is None or summary.mean_phi.size != G:
        raise ConfigError(f"ranking {ranking!r} needs a value summary covering all {G} groups")
    score = summary.mean_phi
    if ranking == "value-minus-c-variance-desc":
        score = score - c * summary.var_phi
    # descending score, ties to the lower group index
    return [int(g) for g in np.lexsort((np.arange(G), -score))]


def group_removal(split: TrainTestSplit, spec: LearnerSpec, groups: GroupAssignment,
                  ranking: str = "value-desc", summary: RepeatedRunSummary | None = None,
                  c: float = 100.0, seed: int = 0) -> RemovalCurve:
    """Remove groups in ranking order, retraining on what is left after each step."""
    game = accuracy_utility(split, spec)
    return removal_curve(game, groups, removal_order(ranking, summary, groups.G, c, seed), ranking)


def removal_curve(game: AccuracyGame, groups: GroupAssignment, order: list[int],
                  ranking: str = "custom") -> RemovalCurve:
    keep = np.ones((len(order) + 1, groups.G), dtype=bool)
    for j, g in enumerate(order):
        keep[j + 1:, g] = False
    acc = game.values(keep[:, groups.group_of])
    return RemovalCurve(list(order), [float(a) for a in acc], ranking)


def mean_random_curve(split: TrainTestSplit, spec: LearnerSpec, groups: GroupAssignment,
                      repeats: int = 20, seed: int = 0) -> RemovalCurve:
    game = accuracy_utility(split, spec)
    curves = [removal_curve(game, groups, removal_order("random", None, groups.G, seed=cell_seed(seed, 3, r)))
              for r in range(repeats)]
    acc = np.mean([cv.accuracies for cv in curves], axis=0)
    return RemovalCurve([], [float(a) for a in acc], f"random(mean of {repeats})")


@dataclass
class RemovalStudy:
    summary: RepeatedRunSummary
    curves: dict[str, RemovalCurve]

    def rank_of(self, group: int) -> int:
        """Position of ``group`` when sorted by ascending estimated value (0 = lowest)."""
        order = np.lexsort((np.arange(self.summary.mean_phi.size), self.summary.mean_phi))
        return int(np.flatnonzero(order == group)[0])


def removal_study(split: TrainTestSplit, spec: LearnerSpec, groups: GroupAssignment, method: Method,
                  R: int = 5, seed: int = 0, c: float = 100.0, random_repeats: int = 20,
                  workers: int = 1) -> RemovalStudy:
    summary = group_shapley(split, spec, groups, method, R, cell_seed(seed, 4), workers)
    curves = {
        "value-desc": group_removal(split, spec, groups, "value-desc", summary),
        "value-minus-c-variance-desc": group_removal(split, spec, groups,
                                                     "value-minus-c-variance-desc", summary, c),
        "random": mean_random_curve(split, spec, groups, random_repeats, cell_seed(seed, 5)),
    }
    return RemovalStudy(summary, curves)
