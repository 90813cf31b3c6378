"""Per-run and pooled performance statistics.

Capacities are always evaluated against the instance passed in, so an
association decided on one channel can be scored on another (links that
are no longer above ``gamma_min`` there carry nothing).
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np

from .association import Association, Instance, user_capacities
from .channel import satisfaction

CAPACITY_CDF_STEP_BPS = 1e6
MISALIGNMENT_BIN_DEG = 0.5


@dataclass
class RunMetrics:
    """One scheme on one realization; per-user arrays are kept so pooling is exact."""

    scheme: str
    iteration: int
    capacity: np.ndarray
    satisfaction: np.ndarray
    degree: np.ndarray
    misalignment: np.ndarray  # signed BS-side misalignment of active links, degrees
    extra: dict = field(default_factory=dict)

    @property
    def n_users(self) -> int:
        return len(self.capacity)

    def scalars(self) -> dict[str, float]:
        """Headline numbers for this run; empty runs report 0 throughout except n_users."""
        n = self.n_users
        served = self.degree > 0
        out = {
            "n_users": float(n),
            "mean_capacity_bps": _mean(self.capacity),
            "served_mean_capacity_bps": _mean(self.capacity[served]),
            "mean_satisfaction": _mean(self.satisfaction),
            "disconnected_fraction": _mean(~served) if n else 0.0,
            "partial_fraction": _mean((self.satisfaction > 0) & (self.satisfaction < 1)) if n else 0.0,
            "mean_degree": _mean(self.degree),
        }
        out.update({k: float(v) for k, v in self.extra.items()})
        return out


def _mean(a) -> float:
    a = np.asarray(a, dtype=float)
    return float(a.mean()) if a.size else 0.0


def summarize(assoc: Association, instance: Instance, iteration: int = 0) -> RunMetrics:
    """Score ``assoc`` on ``instance``; disconnected users count with capacity 0 and satisfaction 0.

    A link counts toward a user's degree only if it is still a candidate on ``instance``.
    """
    usable = np.asarray(assoc.time_share) * instance.candidate
    cap = np.atleast_1d(user_capacities(instance, usable)).astype(float)
    p = np.atleast_1d(satisfaction(cap, instance.radio.r_min_bps)).astype(float)
    active = assoc.active & instance.candidate
    extra = {}
    if assoc.scheme == "optimal":
        extra = {"objective": assoc.objective, "gap": assoc.gap}
    return RunMetrics(assoc.scheme, iteration, cap, p, active.sum(axis=1).astype(int),
                      np.asarray(instance.links.misalign_bs[active], dtype=float), extra)


# -- distributions ----------------------------------------------------------------

@dataclass(frozen=True)
class Histogram:
    """Normalized histogram; ``centers`` are bin centers, ``mass`` sums to 1 (or is empty)."""

    centers: np.ndarray
    mass: np.ndarray
    n: int
    mean: float
    std: float  # population std of the raw samples, not of the binned data


def _histogram(samples, bin_width: float) -> Histogram:
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        return Histogram(np.empty(0), np.empty(0), 0, math.nan, math.nan)
    idx = np.rint(samples / bin_width).astype(np.int64)
    keys, counts = np.unique(idx, return_counts=True)
    return Histogram(keys * bin_width, counts / counts.sum(), int(samples.size),
                     float(samples.mean()), float(samples.std()))


def misalignment_histogram(runs: Iterable[tuple[Association, Instance]],
                           bin_width: float = MISALIGNMENT_BIN_DEG) -> Histogram:
    """Signed BS-side misalignment of every active link, binned around multiples of ``bin_width``."""
    pooled = [np.asarray(inst.links.misalign_bs[a.active], dtype=float) for a, inst in runs]
    return _histogram(np.concatenate(pooled) if pooled else [], bin_width)


def degree_histogram(degrees) -> dict[int, float]:
    degrees = np.asarray(degrees, dtype=int)
    if degrees.size == 0:
        return {}
    keys, counts = np.unique(degrees, return_counts=True)
    return {int(k): float(c / degrees.size) for k, c in zip(keys, counts)}


def capacity_cdf(capacity, step: float = CAPACITY_CDF_STEP_BPS) -> tuple[np.ndarray, np.ndarray]:
    """Empirical CDF on a ``step`` grid: returns (grid points in bps, P(C <= point)) where it changes."""
    capacity = np.asarray(capacity, dtype=float)
    if capacity.size == 0:
        return np.empty(0), np.empty(0)
    cells = np.ceil(capacity / step).astype(np.int64)
    keys, counts = np.unique(cells, return_counts=True)
    return keys * step, np.cumsum(counts) / capacity.size


@dataclass(frozen=True)
class ProbabilityGrid:
    resolution: float
    cells: np.ndarray  # (k, 2) cell coordinates in meters
    occupied: np.ndarray
    connected: np.ndarray

    @property
    def probability(self) -> np.ndarray:
        return self.connected / self.occupied

    def as_dict(self) -> dict[tuple[float, float], float]:
        return {(float(x), float(y)): float(p) for (x, y), p in zip(self.cells, self.probability)}


def connect_probability_grid(runs: Iterable[tuple[Association, np.ndarray]], focal_bs: int,
                             resolution: float = 1.0) -> ProbabilityGrid:
    """Per rounded position, the fraction of users there that hold a link to ``focal_bs``.

    ``runs`` yields ``(association, positions)``; cells nobody visited are absent.
    """
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    keys, hits = [], []
    for assoc, positions in runs:
        positions = np.asarray(positions, dtype=float).reshape(-1, 2)
        keys.append(np.rint(positions / resolution).astype(np.int64))
        hits.append(assoc.active[:, focal_bs] if assoc.active.shape[1] else np.zeros(len(positions), bool))
    if not keys:
        raise ValueError("connect_probability_grid needs at least one run")
    k = np.concatenate(keys)
    h = np.concatenate(hits).astype(float)
    cells, inverse, occupied = np.unique(k, axis=0, return_inverse=True, return_counts=True)
    connected = np.bincount(inverse.ravel(), weights=h, minlength=len(cells))
    return ProbabilityGrid(resolution, cells * resolution, occupied, connected)


# -- pooled report ------------------------------------------------------------------

@dataclass(frozen=True)
class SchemeSummary:
    scheme: str
    iterations: int
    n_users: int
    mean_user_capacity: float
    served_mean_capacity: float
    mean_satisfaction: float
    disconnected_fraction: float
    partial_fraction: float
    mean_degree: float
    degree_histogram: dict[int, float]
    misalignment: Histogram
    capacity_cdf: tuple[np.ndarray, np.ndarray]

    def scalars(self) -> dict[str, float]:
        return {
            "iterations": float(self.iterations),
            "n_users": float(self.n_users),
            "mean_capacity_bps": self.mean_user_capacity,
            "served_mean_capacity_bps": self.served_mean_capacity,
            "mean_satisfaction": self.mean_satisfaction,
            "disconnected_fraction": self.disconnected_fraction,
            "partial_fraction": self.partial_fraction,
            "mean_degree": self.mean_degree,
        }


def pool(runs: list[RunMetrics]) -> SchemeSummary:
    """Pool runs of one scheme, weighting every user equally."""
    if not runs:
        raise ValueError("nothing to pool")
    scheme = runs[0].scheme
    if any(r.scheme != scheme for r in runs):
        raise ValueError("pool() expects runs of a single scheme")
    cap = np.concatenate([r.capacity for r in runs])
    p = np.concatenate([r.satisfaction for r in runs])
    deg = np.concatenate([r.degree for r in runs])
    mis = np.concatenate([r.misalignment for r in runs])
    pooled = RunMetrics(scheme, -1, cap, p, deg, mis).scalars()
    return SchemeSummary(
        scheme=scheme,
        iterations=len(runs),
        n_users=len(cap),
        mean_user_capacity=pooled["mean_capacity_bps"],
        served_mean_capacity=pooled["served_mean_capacity_bps"],
        mean_satisfaction=pooled["mean_satisfaction"],
        disconnected_fraction=pooled["disconnected_fraction"],
        partial_fraction=pooled["partial_fraction"],
        mean_degree=pooled["mean_degree"],
        degree_histogram=degree_histogram(deg),
        misalignment=_histogram(mis, MISALIGNMENT_BIN_DEG),
        capacity_cdf=capacity_cdf(cap),
    )


@dataclass
class MetricsReport:
    per_scheme: dict[str, SchemeSummary]
    runs: list[RunMetrics]
    connect_grid: dict[str, ProbabilityGrid] = field(default_factory=dict)

    @classmethod
    def from_runs(cls, runs: list[RunMetrics], connect_grid=None) -> "MetricsReport":
        runs = sorted(runs, key=lambda r: r.iteration)
        schemes = list(dict.fromkeys(r.scheme for r in runs))
        per = {s: pool([r for r in runs if r.scheme == s]) for s in schemes}
        return cls(per, runs, dict(connect_grid or {}))

    def series(self, scheme: str, metric: str) -> np.ndarray:
        """Per-iteration values of one scalar metric, in iteration order."""
        return np.array([r.scalars()[metric] for r in self.runs if r.scheme == scheme])

    def to_dict(self) -> dict:
        out = {"schemes": {}}
        for name, s in self.per_scheme.items():
            grid, cdf = s.capacity_cdf
            out["schemes"][name] = {
                **s.scalars(),
                "degree_histogram": {str(k): v for k, v in s.degree_histogram.items()},
                "misalignment_histogram": {
                    "bin_width_deg": MISALIGNMENT_BIN_DEG,
                    "centers_deg": s.misalignment.centers.tolist(),
                    "mass": s.misalignment.mass.tolist(),
                    "std_deg": None if math.isnan(s.misalignment.std) else s.misalignment.std,
                },
                "capacity_cdf": {"step_bps": CAPACITY_CDF_STEP_BPS, "capacity_bps": grid.tolist(),
                                 "cdf": cdf.tolist()},
                "per_iteration": [r.scalars() for r in self.runs if r.scheme == name],
            }
        if self.connect_grid:
            out["connect_probability"] = {
                name: {"resolution_m": g.resolution, "cells_m": g.cells.tolist(),
                       "occupied": g.occupied.tolist(), "probability": g.probability.tolist()}
                for name, g in self.connect_grid.items()
            }
        return out
