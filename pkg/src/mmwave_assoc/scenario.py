"""Scenario assembly and the Monte Carlo driver.

A realization is a pure function of ``(config, iteration)``: users, blockers
and shadowing each come from their own named substream of the master seed.
Blockage and rain only change the channel a scheme is *scored* on, unless
``reassociate`` is set, in which case schemes also decide on it. Clustered
users are simply a different user process and are always associated
natively.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .association import (Association, BeamAlignConfig, Instance, SolverConfig, beam_align, snr_dynamic,
                          snr_one, solve_optimal)
from .channel import NO_RAIN, RadioConfig, RainModel, build_link_table
from .geometry import (BlockerField, NetworkLayout, Torus, UserGenerator, UserSet, blocked_matrix,
                       make_hex_layout, sample_blockers, sample_matern, sample_ppp)
from .metrics import MetricsReport, RunMetrics, connect_probability_grid, summarize
from .rng import substream

WORKERS_ENV = "MMWAVE_ASSOC_WORKERS"
SCHEME_ALIASES = {
    "optimal": "optimal",
    "beam_align": "beam_align", "beam-align": "beam_align",
    "snr_one": "snr_one", "snr-1": "snr_one", "snr_1": "snr_one",
    "snr_dynamic": "snr_dynamic", "snr-dynamic": "snr_dynamic",
    "snr_dynamic_pooled": "snr_dynamic_pooled", "snr-dynamic-pooled": "snr_dynamic_pooled",
}


def canonical_scheme(name: str) -> str:
    try:
        return SCHEME_ALIASES[name.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown scheme {name!r}; choose from {sorted(set(SCHEME_ALIASES.values()))}") from None


@dataclass(frozen=True)
class LayoutConfig:
    width_m: float = 800.0
    height_m: float = 1040.0
    isd_m: float = 200.0
    height_offset_m: float = 22.5

    def build(self) -> NetworkLayout:
        return make_hex_layout(Torus(self.width_m, self.height_m), self.isd_m, self.height_offset_m)


@dataclass(frozen=True)
class UserConfig:
    lambda_u: float = 750.0  # users per km^2
    generator: UserGenerator = UserGenerator.PPP
    n_parents: int = 30
    cluster_radius_m: float = 50.0

    def __post_init__(self):
        object.__setattr__(self, "generator", UserGenerator(self.generator))
        if self.lambda_u < 0:
            raise ValueError("lambda_u must be non-negative")
        if self.n_parents < 1:
            raise ValueError("n_parents must be >= 1")
        if not self.cluster_radius_m > 0:
            raise ValueError("cluster_radius_m must be positive")


@dataclass(frozen=True)
class BlockageConfig:
    target_fraction: float = 0.10
    length_range_m: tuple[float, float] = (5.0, 20.0)
    width_range_m: tuple[float, float] = (5.0, 20.0)

    def __post_init__(self):
        object.__setattr__(self, "length_range_m", tuple(float(v) for v in self.length_range_m))
        object.__setattr__(self, "width_range_m", tuple(float(v) for v in self.width_range_m))
        for name in ("length_range_m", "width_range_m"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must satisfy 0 < low <= high")
        if not 0 < self.target_fraction < 1:
            raise ValueError("target_fraction must be in (0, 1)")


@dataclass(frozen=True)
class ScenarioConfig:
    radio: RadioConfig = field(default_factory=RadioConfig)
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    users: UserConfig = field(default_factory=UserConfig)
    blockage: BlockageConfig | None = None
    rain: RainModel | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    sigma_deg: float | None = None  # None -> shipped calibrated table
    seed: int = 0
    iterations: int | None = None  # None -> run until target_total_users
    target_total_users: int = 10_000
    reassociate: bool = False

    def __post_init__(self):
        if self.iterations is not None and self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.target_total_users < 1:
            raise ValueError("target_total_users must be >= 1")
        if self.sigma_deg is not None and not self.sigma_deg > 0:
            raise ValueError("sigma_deg must be positive")

    @property
    def degraded(self) -> bool:
        return self.blockage is not None or (self.rain is not None and self.rain.rate_mm_h > 0)

    def beam_align_config(self) -> BeamAlignConfig:
        if self.sigma_deg is not None:
            return BeamAlignConfig(self.sigma_deg)
        return BeamAlignConfig.calibrated(self.radio.theta_b_deg)

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class ScenarioRealization:
    iteration: int
    users: UserSet
    instance: Instance  # what the schemes decide on
    evaluation: Instance  # what the outcome is scored on
    blockers: BlockerField | None = None


def draw_users(cfg: ScenarioConfig, iteration: int, torus: Torus) -> UserSet:
    rng = substream(cfg.seed, iteration, "users")
    uc = cfg.users
    if uc.generator is UserGenerator.PPP:
        return sample_ppp(torus, uc.lambda_u, rng)
    total = int(rng.poisson(uc.lambda_u * torus.area_km2))
    return sample_matern(torus, total, uc.n_parents, uc.cluster_radius_m, substream(cfg.seed, iteration, "parents"))


def realize(cfg: ScenarioConfig, iteration: int, layout: NetworkLayout | None = None) -> ScenarioRealization:
    layout = cfg.layout.build() if layout is None else layout
    torus = layout.torus
    radio = cfg.radio
    users = draw_users(cfg, iteration, torus)
    n, b = len(users), layout.n_bs

    # both shadowing states are drawn up front so blockage only selects between them
    rng = substream(cfg.seed, iteration, "shadowing")
    sf_los = rng.normal(0.0, radio.sf_los_std_db, (n, b))
    sf_nlos = rng.normal(0.0, radio.sf_nlos_std_db, (n, b))
    normal = build_link_table(users.positions, layout, radio, sf_los, sf_nlos)

    blockers = None
    los = None
    if cfg.blockage is not None:
        bc = cfg.blockage
        blockers = sample_blockers(torus, bc.target_fraction, bc.length_range_m, bc.width_range_m,
                                   rng_seed=substream(cfg.seed, iteration, "blockers"))
        los = ~blocked_matrix(users.positions, layout.bs_positions, blockers, torus)
    rain = cfg.rain if cfg.rain is not None else NO_RAIN
    degraded = normal.degraded(radio, los=los, rain=rain) if (los is not None or rain.rate_mm_h > 0) else normal

    evaluation = Instance(radio, degraded, users.positions, layout)
    instance = evaluation if cfg.reassociate else Instance(radio, normal, users.positions, layout)
    return ScenarioRealization(iteration, users, instance, evaluation, blockers)


def run_scheme(name: str, instance: Instance, cfg: ScenarioConfig) -> Association:
    name = canonical_scheme(name)
    if name == "optimal":
        return solve_optimal(instance, cfg.solver)
    if name == "beam_align":
        return beam_align(instance, cfg.beam_align_config())
    if name == "snr_one":
        return snr_one(instance)
    if name == "snr_dynamic_pooled":
        return snr_dynamic(instance, "link")
    return snr_dynamic(instance)


class SchemeFailure(RuntimeError):
    def __init__(self, scheme: str, seed: int, iteration: int, cause: BaseException):
        super().__init__(f"scheme {scheme!r} failed at seed={seed} iteration={iteration}: {cause!r}")
        self.scheme, self.seed, self.iteration = scheme, seed, iteration


def plan_iterations(cfg: ScenarioConfig, torus: Torus | None = None) -> list[int]:
    """Iteration indices to run: ``cfg.iterations`` if set, else until the drawn users reach the target."""
    if cfg.iterations is not None:
        return list(range(cfg.iterations))
    if cfg.users.lambda_u == 0:
        raise ValueError("lambda_u = 0 never reaches target_total_users; set iterations explicitly")
    torus = cfg.layout.build().torus if torus is None else torus
    total, it = 0, 0
    while total < cfg.target_total_users:
        total += len(draw_users(cfg, it, torus))
        it += 1
    return list(range(it))


def _run_iteration(cfg: ScenarioConfig, schemes: tuple[str, ...], iteration: int,
                   layout: NetworkLayout | None = None, keep_positions: bool = False):
    real = realize(cfg, iteration, layout)
    out = []
    for name in schemes:
        try:
            assoc = run_scheme(name, real.instance, cfg)
        except Exception as exc:  # report which draw to replay
            raise SchemeFailure(name, cfg.seed, iteration, exc) from exc
        rm = summarize(assoc, real.evaluation, iteration)
        out.append((rm, (assoc.active, real.users.positions) if keep_positions else None))
    return out


def _workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    return max(1, int(workers))


def run_experiment(cfg: ScenarioConfig, schemes, workers: int | None = None,
                   focal_bs: int | None = None) -> MetricsReport:
    """Evaluate every scheme on the same realizations and pool the results.

    ``workers`` (or the ``MMWAVE_ASSOC_WORKERS`` environment variable) runs
    iterations in parallel processes; results are merged in iteration order
    so the report does not depend on it. ``focal_bs`` adds a per-scheme map
    of the probability of connecting to that BS.
    """
    schemes = tuple(canonical_scheme(s) for s in schemes)
    if not schemes:
        raise ValueError("at least one scheme is required")
    layout = cfg.layout.build()
    if focal_bs is not None and not 0 <= focal_bs < layout.n_bs:
        raise ValueError(f"focal_bs must be in [0, {layout.n_bs})")
    if "beam_align" in schemes:
        try:
            cfg.beam_align_config()
        except KeyError as exc:
            raise ValueError(str(exc)) from None
    iterations = plan_iterations(cfg, layout.torus)
    keep = focal_bs is not None
    n_workers = min(_workers(workers), len(iterations))
    if n_workers > 1:
        with ProcessPoolExecutor(n_workers) as pool:
            results = list(pool.map(_run_iteration, [cfg] * len(iterations), [schemes] * len(iterations),
                                    iterations, [None] * len(iterations), [keep] * len(iterations)))
    else:
        results = [_run_iteration(cfg, schemes, it, layout, keep) for it in iterations]

    runs: list[RunMetrics] = [rm for per_it in results for rm, _ in per_it]
    grids = {}
    if keep:
        for k, name in enumerate(schemes):
            pairs = [(_ActiveOnly(per_it[k][1][0]), per_it[k][1][1]) for per_it in results]
            grids[name] = connect_probability_grid(pairs, focal_bs)
    return MetricsReport.from_runs(runs, grids)


@dataclass(frozen=True)
class _ActiveOnly:
    active: np.ndarray


def expected_iterations(cfg: ScenarioConfig) -> int:
    """``ceil(target / (lambda_u * area))``: the mean-count estimate of the iteration budget."""
    area = cfg.layout.width_m * cfg.layout.height_m / 1e6
    return math.ceil(cfg.target_total_users / (cfg.users.lambda_u * area))


def calibration_runs(cfg: ScenarioConfig, theta_grid, lambda_grid):
    """Yield ``(association, instance)`` from the optimal scheme over a beamwidth x density grid."""
    layout = cfg.layout.build()
    for theta in theta_grid:
        for lam in lambda_grid:
            cell = cfg.with_(radio=replace(cfg.radio, theta_b_deg=float(theta)),
                             users=replace(cfg.users, lambda_u=float(lam)))
            for it in plan_iterations(cell, layout.torus):
                real = realize(cell, it, layout)
                if real.instance.n_users == 0:
                    continue
                try:
                    assoc = solve_optimal(real.instance, cell.solver)
                except Exception as exc:
                    raise SchemeFailure("optimal", cell.seed, it, exc) from exc
                yield assoc, real.instance
