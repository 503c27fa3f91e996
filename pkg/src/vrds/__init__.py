"""Data Shapley valuation: exact enumeration, permutation sampling and stratified (VRDS) sampling."""

__version__ = "0.1.0"

from .allocation import (AllocationPlan, FFamily, allocate_f, allocate_neyman, integerize_allocation,
                         integerize_neyman, plan_from_f, plan_from_sigma, theoretical_variance)
from .complexity import (ApproximationSpec, empirical_epsilon_delta_check, permutation_sample_bound,
                         stratified_sample_bound, stratified_sample_bound_harmonic)
from .data import (Dataset, GroupAssignment, TrainTestSplit, assign_groups, blobs_split,
                   blobs_with_junk, generate_blobs, load_csv, split)
from .errors import *  # noqa: F401,F403
from .estimators import (Method, RepeatedRunSummary, ShapleyEstimate, estimate, permutation_shapley,
                         repeated_runs, stratified_shapley)
from .exact import ExactShapleyResult, check_axioms, exact_shapley, exact_stratum_stats
from .experiments import (GroupGame, RemovalCurve, SweepGrid, exact_vs_estimate, group_removal,
                          group_shapley, variance_study)
from .game import (AdditiveGame, Coalition, CooperativeGame, GloveGame, RandomBoundedGame, SymmetricMajorityGame,
                   SyntheticGameSpec, WeightedVotingGame, evaluate_utility, make_synthetic_game,
                   marginal_contribution, normalize_utility)
from .learners import AccuracyGame, LearnerSpec, accuracy_utility, train_predict
from .reports import ValuationReport, emit_plot_data, load_report, save_report
