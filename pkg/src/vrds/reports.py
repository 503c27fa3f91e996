"""JSON valuation reports and comma-delimited plot series."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MissingFileError, PlotKindError, ReportError, SchemaVersionError

SCHEMA_VERSION = 1
REQUIRED_FIELDS = ("schema_version", "method", "config", "estimates", "variances", "budgets",
                   "seeds", "timing")
PLOT_KINDS = ("variance-vs-m", "sweep-grid", "removal-curve", "exact-vs-estimate")


def jsonable(obj):
    """Recursively convert numpy containers and scalars to plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


@dataclass
class ValuationReport:
    method: object
    config: dict
    estimates: object  # list of values, or {series label: list}
    variances: object = None
    budgets: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @property
    def n(self) -> int:
        est = self.estimates
        if isinstance(est, dict):
            return min((len(v) for v in est.values()), default=0)
        return len(est) if est is not None else 0

    def to_dict(self) -> dict:
        return jsonable({
            "schema_version": self.schema_version,
            "method": self.method,
            "config": self.config,
            "estimates": self.estimates,
            "variances": self.variances,
            "budgets": self.budgets,
            "seeds": self.seeds,
            "timing": self.timing,
            "results": self.results,
        })

    def body(self) -> dict:
        """Everything except wall-clock and runtime details."""
        d = self.to_dict()
        d.pop("timing")
        return d

    def body_json(self) -> str:
        return json.dumps(self.body(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ValuationReport":
        missing = [k for k in REQUIRED_FIELDS if k not in d]
        if missing:
            raise ReportError(f"report is missing fields {missing}")
        if d["schema_version"] != SCHEMA_VERSION:
            raise SchemaVersionError(f"unsupported report schema version {d['schema_version']!r}; "
                                     f"this toolkit reads version {SCHEMA_VERSION}")
        return cls(method=d["method"], config=d["config"], estimates=d["estimates"],
                   variances=d["variances"], budgets=d["budgets"], seeds=d["seeds"],
                   timing=d["timing"], results=d.get("results", {}),
                   schema_version=d["schema_version"])

    def __eq__(self, other) -> bool:
        if not isinstance(other, ValuationReport):
            return NotImplemented
        return json.dumps(self.to_dict(), sort_keys=True) == json.dumps(other.to_dict(), sort_keys=True)


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file so no partial output survives."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_report(report: ValuationReport, path) -> None:
    if report.n == 0:
        raise ReportError("refusing to save a report with no estimates (n = 0)")
    # repr-based float formatting round-trips every double exactly
    atomic_write(path, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")


def load_report(path) -> ValuationReport:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"no such report: {path}")
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ReportError(f"{path} is not valid JSON: {exc}") from None
    if not isinstance(d, dict):
        raise ReportError(f"{path} does not hold a report object")
    return ValuationReport.from_dict(d)


# ------------------------------------------------------------------ plot series


def _log10(v: float) -> float:
    return math.log10(v) if v > 0 else float("-inf")


def _require(report: ValuationReport, key: str, kind: str):
    if key not in report.results:
        raise PlotKindError(f"{kind} plot data needs results[{key!r}] in the report")
    return report.results[key]


def _variance_points(reports) -> list[tuple[str, int, float]]:
    pts = []
    for r in reports:
        if "cells" in r.results:
            pts += [(c["label"], int(c["m"]), float(c["mean_variance"])) for c in r.results["cells"]]
            continue
        if r.variances is None or "m" not in r.budgets:
            raise PlotKindError("variance-vs-m plot data needs variances and budgets['m']")
        label = r.method.get("label", r.method.get("kind")) if isinstance(r.method, dict) else str(r.method)
        pts.append((label, int(r.budgets["m"]), float(np.mean(r.variances))))
    return pts


def plot_rows(reports, kind: str) -> tuple[list[str], list[list]]:
    if isinstance(reports, ValuationReport):
        reports = [reports]
    reports = list(reports)
    if kind not in PLOT_KINDS:
        raise PlotKindError(f"unknown plot kind {kind!r}; expected one of {PLOT_KINDS}")
    if not reports:
        raise PlotKindError("no reports given")

    if kind == "variance-vs-m":
        pts = _variance_points(reports)
        labels = list(dict.fromkeys(p[0] for p in pts))
        ms = sorted({p[1] for p in pts})
        table = {(p[0], p[1]): p[2] for p in pts}
        header = ["m"] + [f"{lab}_{col}" for lab in labels for col in ("var", "log10var")]
        rows = []
        for m in ms:
            row = [m]
            for lab in labels:
                v = table.get((lab, m), float("nan"))
                row += [v, _log10(v) if v == v else float("nan")]
            rows.append(row)
        return header, rows

    if kind == "sweep-grid":
        header = ["method", "a", "m", "var", "log10var"]
        rows = []
        for r in reports:
            for c in _require(r, "cells", kind):
                a = "" if c.get("a") is None else c["a"]
                rows.append([c["method"], a, c["m"], c["mean_variance"], _log10(c["mean_variance"])])
        return header, rows

    if kind == "removal-curve":
        curves = {}
        for r in reports:
            curves.update(_require(r, "curves", kind))
        labels = list(curves)
        length = max(len(c["accuracies"]) for c in curves.values())
        header = ["groups_removed"] + [f"{lab}_accuracy" for lab in labels]
        rows = [[g] + [curves[lab]["accuracies"][g] if g < len(curves[lab]["accuracies"]) else ""
                       for lab in labels] for g in range(length)]
        return header, rows

    r = reports[0]
    exact = _require(r, "exact", kind)
    if not isinstance(r.estimates, dict) or not isinstance(r.variances, dict):
        raise PlotKindError("exact-vs-estimate plot data needs per-method estimates and variances")
    labels = list(r.estimates)
    header = ["point_index", "exact"] + [f"{lab}_{col}" for lab in labels for col in ("estimate", "variance")]
    rows = []
    for i, e in enumerate(exact):
        row = [i, e]
        for lab in labels:
            row += [r.estimates[lab][i], r.variances[lab][i]]
        rows.append(row)
    return header, rows


def emit_plot_data(reports, kind: str, path) -> None:
    header, rows = plot_rows(reports, kind)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    atomic_write(path, buf.getvalue())
