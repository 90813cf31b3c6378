"""CSV/JSON emission.

Floats are written with ``repr`` (shortest round-trip decimal), so two runs
with the same inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .metrics import MetricsReport

LONG_COLUMNS = ("scheme", "iteration", "metric", "value")
SUMMARY_COLUMNS = ("scheme", "iterations", "n_users", "mean_capacity_bps", "served_mean_capacity_bps",
                   "mean_satisfaction", "disconnected_fraction", "partial_fraction", "mean_degree")
DISTRIBUTION_COLUMNS = ("scheme", "distribution", "x", "value")


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def long_rows(report: MetricsReport):
    for r in report.runs:
        for metric, value in r.scalars().items():
            yield (r.scheme, r.iteration, metric, value)


def summary_rows(report: MetricsReport):
    for name, s in report.per_scheme.items():
        sc = s.scalars()
        yield (name, *(sc[c] for c in SUMMARY_COLUMNS[1:]))


def distribution_rows(report: MetricsReport):
    for name, s in report.per_scheme.items():
        for k, v in s.degree_histogram.items():
            yield (name, "degree", k, v)
        for x, v in zip(s.misalignment.centers, s.misalignment.mass):
            yield (name, "misalignment_deg", x, v)
        for x, v in zip(*s.capacity_cdf):
            yield (name, "capacity_cdf_bps", x, v)


def write_csv(path, header, rows, prefix: tuple = ()) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in (*prefix, *row)])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return None if math.isnan(v) or math.isinf(v) else v
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n")
    return path


def write_report(out_dir, report: MetricsReport) -> dict[str, Path]:
    """Write the standard set of result files into ``out_dir``; returns name -> path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return {
        "metrics_long": write_csv(out / "metrics_long.csv", LONG_COLUMNS, long_rows(report)),
        "summary": write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary_rows(report)),
        "distributions": write_csv(out / "distributions.csv", DISTRIBUTION_COLUMNS, distribution_rows(report)),
        "report": write_json(out / "report.json", report.to_dict()),
    }
