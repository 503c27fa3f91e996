"""Command-line front end: ``vrds {value,exact,sweep,removal,bound,check}``.

Flags override values from an optional JSON ``--config`` file. The merged
configuration is echoed into every report and can be fed back through
``--config`` to reproduce it. Exit codes: 0 success, 1 usage or configuration
error, 2 data or I/O error, 3 size cap exceeded, 4 ``--verify`` mismatch.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .allocation import FFamily
from .complexity import (ApproximationSpec, empirical_epsilon_delta_check, permutation_sample_bound,
                         stratified_bound_terms, stratified_sample_bound,
                         stratified_sample_bound_harmonic)
from .data import assign_groups, blobs_split, blobs_with_junk, load_csv, split
from .errors import ConfigError, DataError, SizeCapError, VRDSError
from .estimators import Method, repeated_runs
from .exact import DEFAULT_CAP, check_axioms, exact_shapley
from .experiments import SweepGrid, removal_study, variance_study
from .game import SyntheticGameSpec, make_synthetic_game
from .learners import LearnerSpec, accuracy_utility
from .reports import PLOT_KINDS, ValuationReport, atomic_write, emit_plot_data, save_report

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CAP, EXIT_VERIFY = 0, 1, 2, 3, 4
WORKERS_ENV = "VRDS_WORKERS"

_BLOB_KEYS = {"n": int, "n_test": int, "C": int, "d": int, "separation": float, "sep": float,
              "noise": float, "seed": int}

DEFAULTS = {
    "blobs": None, "csv": None, "label_column": "-1", "header": False, "train_fraction": 0.8,
    "split_seed": 0, "game": None, "game_params": {},
    "learner": "knn", "knn_k": 5,
    "method": "vrds", "f": None, "a": None, "m": 500, "repeats": 5, "seed": 0,
    "cap": DEFAULT_CAP,
    "a_values": [-2.0, -1.0, -0.5, 0.0, 3.0], "m_values": [100, 500, 1000], "sweep_methods": None,
    "groups": 10, "group_size": 10, "n_test": 100, "junk_group": 0, "junk": True, "c": 100.0,
    "random_repeats": 20,
    "eps": 0.1, "delta": 0.05, "r": 1.0, "n": None, "trials": 500,
}

COMMAND_KEYS = {
    "value": ["source", "learner", "method", "repeats", "seed"],
    "exact": ["source", "learner", "cap"],
    "sweep": ["source", "learner", "sweep", "seed"],
    "removal": ["source", "learner", "method", "repeats", "seed", "removal"],
    "bound": ["bound"],
    "check": ["source", "learner", "method", "bound", "seed", "cap", "trials"],
}
_GROUP_KEYS = {
    "source": ["blobs", "csv", "label_column", "header", "train_fraction", "split_seed", "game",
               "game_params"],
    "learner": ["learner", "knn_k"],
    "method": ["method", "f", "a", "m"],
    "sweep": ["a_values", "m_values", "sweep_methods", "repeats"],
    "removal": ["groups", "group_size", "n_test", "junk_group", "junk", "c", "random_repeats"],
    "bound": ["eps", "delta", "r", "n", "f", "a"],
}


class UsageError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def parse_blobs(text) -> dict:
    """``n=30,C=2,d=2,separation=3,noise=1,seed=0`` -> dict; ``n_test`` defaults to ``n``."""
    if isinstance(text, dict):
        spec = dict(text)
    else:
        spec = {}
        for item in str(text).split(","):
            if not item.strip():
                continue
            key, sep, value = item.partition("=")
            key = key.strip()
            if not sep or key not in _BLOB_KEYS:
                raise UsageError(f"bad --blobs item {item!r}; keys are {sorted(_BLOB_KEYS)}")
            try:
                spec[key] = _BLOB_KEYS[key](value)
            except ValueError:
                raise UsageError(f"bad --blobs value {item!r}") from None
    if "sep" in spec:
        spec["separation"] = spec.pop("sep")
    if "n" not in spec:
        raise UsageError("--blobs needs n=<training points>")
    spec.setdefault("n_test", spec["n"])
    for key, default in (("C", 2), ("d", 2), ("separation", 3.0), ("noise", 1.0), ("seed", 0)):
        spec.setdefault(key, default)
    return spec


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vrds", description="Data Shapley valuation with permutation and stratified sampling.")
    p.add_argument("--version", action="version", version=f"vrds {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file of option values; flags override it")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--workers", type=int, help=f"worker threads (default ${WORKERS_ENV} or 1)")
    common.add_argument("--out", help="write the JSON report here")
    common.add_argument("--emit-plot-data", dest="emit_plot_data", metavar="PATH",
                        help="also write comma-delimited plot series")
    common.add_argument("--plot-kind", dest="plot_kind", choices=PLOT_KINDS)
    common.add_argument("--verify", action="store_true", default=None,
                        help="run twice and fail unless report bodies match bitwise")

    source = _Parser(add_help=False)
    source.add_argument("--blobs", help="synthetic blobs, e.g. n=30,C=2,d=2,separation=3,noise=1,seed=0")
    source.add_argument("--csv", help="comma-delimited file with one integer label column")
    source.add_argument("--label-column", dest="label_column", help="label column name or index")
    source.add_argument("--header", action="store_true", default=None)
    source.add_argument("--train-fraction", dest="train_fraction", type=float)
    source.add_argument("--split-seed", dest="split_seed", type=int)
    source.add_argument("--game", help="synthetic game kind instead of a dataset")
    source.add_argument("--game-params", dest="game_params", type=json.loads,
                        help='JSON parameters, e.g. \'{"weights": [1, 2, 3]}\'')
    source.add_argument("--learner", choices=("knn", "naive-bayes", "logreg"))
    source.add_argument("--knn-k", dest="knn_k", type=int)

    method = _Parser(add_help=False)
    method.add_argument("--method", choices=("permutation", "vrds"))
    method.add_argument("--f", choices=("constant", "harmonic", "power"))
    method.add_argument("--a", type=float, help="exponent of f(k) = (k+1)^a; implies --f power")
    method.add_argument("--m", type=int, help="permutations, or marginal samples per point")
    method.add_argument("--repeats", type=int)

    cap = _Parser(add_help=False)
    cap.add_argument("--cap", type=int, help="largest n for exact enumeration")

    bound = _Parser(add_help=False)
    bound.add_argument("--eps", type=float)
    bound.add_argument("--delta", type=float)
    bound.add_argument("--r", type=float, help="marginal-contribution range")
    bound.add_argument("--n", type=int, help="player count for the stratified bound")

    sub.add_parser("value", parents=[common, source, method], help="estimate values with repeated runs")
    sub.add_parser("exact", parents=[common, source, cap], help="exact values by enumeration")

    sw = sub.add_parser("sweep", parents=[common, source], help="variance over a grid of (method, a, m)")
    sw.add_argument("--a-values", dest="a_values", type=_float_list)
    sw.add_argument("--m-values", dest="m_values", type=_int_list)
    sw.add_argument("--methods", dest="sweep_methods", type=lambda s: s.split(","))
    sw.add_argument("--repeats", type=int)

    rm = sub.add_parser("removal", parents=[common, source, method], help="group removal curves")
    rm.add_argument("--groups", type=int, help="group count G")
    rm.add_argument("--group-size", dest="group_size", type=int)
    rm.add_argument("--n-test", dest="n_test", type=int)
    rm.add_argument("--junk-group", dest="junk_group", type=int)
    rm.add_argument("--no-junk", dest="junk", action="store_false", default=None,
                    help="with --blobs/--csv, groups are random and none is label-shuffled")
    rm.add_argument("--c", type=float, help="variance penalty in value - c * variance ranking")
    rm.add_argument("--random-repeats", dest="random_repeats", type=int)

    bd = sub.add_parser("bound", parents=[common, bound], help="sample sizes for an (eps, delta) guarantee")
    bd.add_argument("--f", choices=("constant", "harmonic", "power"))
    bd.add_argument("--a", type=float)

    ck = sub.add_parser("check", parents=[common, source, method, bound, cap],
                        help="empirical (eps, delta) exceedance at the prescribed budget")
    ck.add_argument("--trials", type=int)
    return p


# ------------------------------------------------------------------ configuration


def _load_config_file(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"no such config file: {p}")
    try:
        d = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {p} is not valid JSON: {exc}") from None
    if isinstance(d, dict) and "config" in d and "schema_version" in d:
        d = d["config"]  # a report: reuse its echoed configuration
    if not isinstance(d, dict):
        raise UsageError(f"config file {p} must hold a JSON object")
    return d


def resolve_config(args: argparse.Namespace) -> dict:
    flags = {k: v for k, v in vars(args).items() if v is not None}
    file_cfg = _load_config_file(args.config) if args.config else {}
    unknown = set(file_cfg) - set(DEFAULTS)
    if unknown:
        raise UsageError(f"unknown config keys {sorted(unknown)}")
    keys = [k for g in COMMAND_KEYS[args.command] for k in _GROUP_KEYS.get(g, [g])]
    cfg = {}
    for k in dict.fromkeys(keys):
        v = flags.get(k, file_cfg.get(k, DEFAULTS[k]))
        cfg[k] = v
    if cfg.get("blobs") is not None:
        cfg["blobs"] = parse_blobs(cfg["blobs"])
    if "a" in cfg and cfg["a"] is not None:
        if cfg.get("f") not in (None, "power"):
            raise UsageError("--a only applies to --f power")
        cfg["f"] = "power"
    if cfg.get("f") == "power" and cfg.get("a") is None:
        raise UsageError("--f power needs --a")
    return cfg


def runtime(args) -> dict:
    workers = args.workers
    if workers is None:
        env = os.environ.get(WORKERS_ENV, "1")
        try:
            workers = int(env)
        except ValueError:
            raise UsageError(f"${WORKERS_ENV} must be an integer, got {env!r}") from None
    if workers < 1:
        raise UsageError("--workers must be >= 1")
    return {"workers": workers}


def family(cfg) -> FFamily | None:
    if cfg.get("f") is None:
        return None
    if cfg["f"] == "power":
        return FFamily.power(cfg["a"])
    return FFamily(cfg["f"])


def method_from(cfg) -> Method:
    if cfg["method"] == "permutation":
        return Method("permutation", cfg["m"])
    return Method("vrds", cfg["m"], f=family(cfg))


def learner_from(cfg) -> LearnerSpec:
    return LearnerSpec(kind=cfg["learner"], k=cfg["knn_k"])


def _label_column(value):
    if isinstance(value, int):
        return value
    try:
        return int(value)
    except ValueError:
        return value


def split_from(cfg):
    """Train/test split from the configured dataset source, or None for synthetic games."""
    chosen = [k for k in ("blobs", "csv", "game") if cfg.get(k) is not None]
    if len(chosen) > 1:
        raise UsageError(f"give only one data source, got {chosen}")
    if cfg.get("blobs") is not None:
        b = cfg["blobs"]
        return blobs_split(b["n"], b["n_test"], b["C"], b["d"], b["separation"], b["noise"], b["seed"])
    if cfg.get("csv") is not None:
        data = load_csv(cfg["csv"], _label_column(cfg["label_column"]), bool(cfg["header"]))
        return split(data, cfg["train_fraction"], cfg["split_seed"])
    return None


def game_from(cfg):
    """(game, split-or-None) for the configured source."""
    s = split_from(cfg)
    if s is not None:
        return accuracy_utility(s, learner_from(cfg)), s
    if cfg.get("game") is None:
        raise UsageError("no data source: give --blobs, --csv or --game")
    return make_synthetic_game(SyntheticGameSpec(cfg["game"], dict(cfg.get("game_params") or {}))), None


def _source_results(s) -> dict:
    if s is None:
        return {}
    out = {"n_train": len(s.train), "n_test": len(s.test), "n_classes": s.n_classes}
    if s.train.label_map is not None:
        out["label_map"] = list(s.train.label_map)
    return out


def _plans_dict(plans) -> dict | None:
    if not plans:
        return None
    unique = {tuple(p.counts) for p in plans}
    p = plans[0]
    return {"counts": [list(q.counts) for q in plans] if len(unique) > 1 else list(p.counts),
            "budget": p.budget, "actual_total": max(q.actual_total for q in plans),
            "overrun": any(q.overrun for q in plans), "guaranteed": p.guaranteed}


# ---------------------------------------------------------------------- commands


def cmd_value(cfg, rt) -> tuple[ValuationReport, str]:
    game, s = game_from(cfg)
    method = method_from(cfg)
    summary = repeated_runs(method, game, cfg["repeats"], cfg["seed"], rt["workers"])
    plan = _plans_dict(summary.plans)
    budgets = {"m": method.m, "marginal_samples_per_point": summary.marginal_samples_per_point,
               "utility_evals": summary.utility_evals}
    if plan is not None:
        budgets.update(actual_total=plan["actual_total"], overrun=plan["overrun"])
    summary_results = {"per_run": summary.per_run, "standard_error": summary.standard_error,
                       "plan": plan, **_source_results(s)}
    report = ValuationReport(method.to_dict(), cfg, summary.mean_phi, summary.var_phi, budgets,
                             {"master": cfg["seed"], "runs": summary.seeds}, results=summary_results)
    return report, "variance-vs-m"


def cmd_exact(cfg, rt) -> tuple[ValuationReport, str]:
    game, s = game_from(cfg)
    if game.n > cfg["cap"]:
        raise SizeCapError(f"exact enumeration is capped at n = {cfg['cap']} players; got n = {game.n} "
                           f"(raise --cap to allow it)")
    res = exact_shapley(game, cfg["cap"], rt["workers"])
    axioms = check_axioms(game, res.phi, cap=cfg["cap"])
    results = {**res.to_dict(), "exact": res.phi, "axioms": axioms.to_dict(), **_source_results(s)}
    report = ValuationReport({"kind": "exact", "label": "exact"}, cfg, {"exact": res.phi},
                             {"exact": np.zeros(game.n)}, {"utility_evals": 1 << game.n},
                             {"master": None}, results=results)
    return report, "exact-vs-estimate"


def cmd_sweep(cfg, rt) -> tuple[ValuationReport, str]:
    game, s = game_from(cfg)
    methods = tuple(cfg["sweep_methods"] or ("permutation", "vrds"))
    grid = SweepGrid(list(cfg["a_values"]), list(cfg["m_values"]), methods, cfg["repeats"], cfg["seed"])
    table = variance_study(game, grid, rt["workers"])
    estimates = {k: v.mean_phi for k, v in table.summaries.items()}
    variances = {k: v.var_phi for k, v in table.summaries.items()}
    budgets = {"m_values": grid.m_values,
               "utility_evals": sum(c["utility_evals"] for c in table.cells)}
    seeds = {"master": cfg["seed"], "runs": {k: v.seeds for k, v in table.summaries.items()}}
    results = {"cells": table.cells, "trend": table.trend(), **_source_results(s)}
    return ValuationReport({"kind": "sweep", **grid.to_dict()}, cfg, estimates, variances, budgets,
                           seeds, results=results), "sweep-grid"


def cmd_removal(cfg, rt) -> tuple[ValuationReport, str]:
    results = {}
    junk = None
    if cfg.get("blobs") is None and cfg.get("csv") is None and cfg.get("game") is None:
        if not cfg["junk"]:
            raise UsageError("--no-junk needs --blobs or --csv")
        s, groups, changed = blobs_with_junk(cfg["groups"], cfg["group_size"], cfg["n_test"],
                                             junk_group=cfg["junk_group"], seed=cfg["seed"])
        junk = cfg["junk_group"]
        results.update(junk_group=junk, junk_changed_fraction=changed)
    else:
        s = split_from(cfg)
        if s is None:
            raise UsageError("removal needs a dataset (--blobs or --csv), not a synthetic game")
        groups = assign_groups(len(s.train), cfg["groups"], cfg["seed"])
    study = removal_study(s, learner_from(cfg), groups, method_from(cfg), cfg["repeats"], cfg["seed"],
                          cfg["c"], cfg["random_repeats"], rt["workers"])
    curves = {k: v.to_dict() for k, v in study.curves.items()}
    results.update(curves=curves, group_of=groups.group_of, **_source_results(s))
    if junk is not None:
        results["junk_rank_ascending"] = study.rank_of(junk)
    sm = study.summary
    budgets = {"m": cfg["m"], "marginal_samples_per_point": sm.marginal_samples_per_point,
               "utility_evals": sm.utility_evals}
    report = ValuationReport(method_from(cfg).to_dict(), cfg, sm.mean_phi, sm.var_phi, budgets,
                             {"master": cfg["seed"], "runs": sm.seeds}, results=results)
    return report, "removal-curve"


def bound_values(cfg) -> dict:
    out = {}
    spec = ApproximationSpec(cfg["eps"], cfg["delta"], cfg["r"], cfg["n"] or 1)
    out["permutation"] = permutation_sample_bound(spec)
    if cfg.get("n") is not None:
        f = family(cfg) or FFamily("harmonic")
        if f.kind == "harmonic":
            out["stratified"] = stratified_sample_bound_harmonic(spec)
            out["stratified_general"] = stratified_sample_bound(spec, f)
        else:
            out["stratified"] = stratified_sample_bound(spec, f)
        out["stratified_terms"] = list(stratified_bound_terms(spec, f))
        out["f"] = f.to_dict()
    return out


def cmd_bound(cfg, rt) -> tuple[dict, str]:
    return bound_values(cfg), "bound"


def cmd_check(cfg, rt) -> tuple[ValuationReport, str]:
    game, s = game_from(cfg)
    if game.n > cfg["cap"]:
        raise SizeCapError(f"the check needs exact values, capped at n = {cfg['cap']}; got n = {game.n}")
    exact = exact_shapley(game, cfg["cap"], rt["workers"]).phi
    spec = ApproximationSpec(cfg["eps"], cfg["delta"], cfg["r"], cfg["n"] or game.n)
    res = empirical_epsilon_delta_check(cfg["method"], game, exact, spec, cfg["trials"], cfg["seed"],
                                        family(cfg), rt["workers"])
    results = {"exact": exact, "exceedance": res.fraction, "noise_margin": res.noise_margin,
               "threshold": res.delta + res.noise_margin, "sound": res.sound, **_source_results(s)}
    method = Method(cfg["method"], res.m, f=family(cfg) if cfg["method"] == "vrds" else None)
    report = ValuationReport(method.to_dict(), cfg, res.fraction, None,
                             {"m": res.m, "trials": res.trials}, {"master": cfg["seed"]},
                             results=results)
    return report, "exceedance"


COMMANDS = {"value": cmd_value, "exact": cmd_exact, "sweep": cmd_sweep, "removal": cmd_removal,
            "bound": cmd_bound, "check": cmd_check}


# ----------------------------------------------------------------------- output


def _body(result) -> str:
    if isinstance(result, ValuationReport):
        return result.body_json()
    return json.dumps(result, sort_keys=True)


def _summary_lines(command, result) -> list[str]:
    if command == "bound":
        lines = [f"permutation bound (r={result.get('r', '')}): {result['permutation']}"]
        if "stratified" in result:
            lines.append(f"stratified bound ({FFamily.from_dict(result['f']).label()}): {result['stratified']}")
        if "stratified_general" in result:
            lines.append(f"stratified bound (two-term form): {result['stratified_general']}")
        return lines
    r = result
    if command == "check":
        fr = ", ".join(f"{x:.4f}" for x in r.estimates)
        verdict = "within" if r.results["sound"] else "EXCEEDS"
        return [f"m = {r.budgets['m']}, trials = {r.budgets['trials']}",
                f"exceedance per player: {fr}",
                f"threshold {r.results['threshold']:.4f}: {verdict}"]
    est = r.estimates
    if command == "exact":
        est = est["exact"]
        lines = [f"exact: n = {len(est)}, axioms {'pass' if all(a['passed'] for a in r.results['axioms'].values()) else 'FAIL'}"]
        return lines + [f"  {i}: {float(v):.12g}" for i, v in enumerate(est[:20])]
    if isinstance(est, dict):
        return [f"{k}: mean variance {float(np.mean(r.variances[k])):.4g}" for k in est]
    lines = [f"{r.method.get('label', r.method.get('kind'))}: n = {len(est)}"]
    lines += [f"  {i}: {float(v):.6g}" + (f"  (var {float(r.variances[i]):.3g})" if r.variances is not None else "")
              for i, v in enumerate(np.asarray(est)[:20])]
    if command == "removal":
        for k, c in r.results["curves"].items():
            lines.append(f"AUC {k}: {c['auc']:.4f}")
    return lines


def _plot_text(command, result, kind) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if kind == "bound":
        w.writerow(["quantity", "value"])
        for k in ("permutation", "stratified", "stratified_general"):
            if k in result:
                w.writerow([k, result[k]])
    else:  # exceedance
        w.writerow(["point_index", "exact", "exceedance"])
        for i, (e, x) in enumerate(zip(result.results["exact"], result.estimates)):
            w.writerow([i, repr(float(e)), repr(float(x))])
    return buf.getvalue()


def _write_outputs(args, command, result, kind, rt, elapsed) -> None:
    written = []
    try:
        if isinstance(result, ValuationReport):
            result.timing = {"wall_seconds": elapsed, **rt}
        if args.out:
            if isinstance(result, ValuationReport):
                save_report(result, args.out)
            else:
                atomic_write(args.out, json.dumps({"config": None, **result}, indent=2, sort_keys=True) + "\n")
            written.append(args.out)
        if args.emit_plot_data:
            plot_kind = args.plot_kind or kind
            if isinstance(result, ValuationReport) and plot_kind in PLOT_KINDS:
                emit_plot_data(result, plot_kind, args.emit_plot_data)
            elif args.plot_kind is not None and args.plot_kind != kind:
                raise ConfigError(f"{command} output cannot be drawn as {args.plot_kind}")
            else:
                atomic_write(args.emit_plot_data, _plot_text(command, result, kind))
            written.append(args.emit_plot_data)
    except BaseException:
        for path in written:
            Path(path).unlink(missing_ok=True)
        raise


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = resolve_config(args)
    rt = runtime(args)
    fn = COMMANDS[args.command]
    t0 = time.perf_counter()
    result, kind = fn(cfg, rt)
    elapsed = time.perf_counter() - t0
    if args.verify:
        again, _ = fn(cfg, rt)
        if _body(again) != _body(result):
            print("verify: re-run produced a different report body", file=sys.stderr)
            return EXIT_VERIFY
    _write_outputs(args, args.command, result, kind, rt, elapsed)
    if args.command == "bound":
        result = {**result, "r": cfg["r"]}
    for line in _summary_lines(args.command, result):
        print(line)
    if args.verify:
        print("verify: identical report bodies")
    return EXIT_OK


def main(argv=None) -> int:
    try:
        return run(argv)
    except SizeCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (VRDSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
