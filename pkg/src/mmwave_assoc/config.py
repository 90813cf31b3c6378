"""JSON configuration: schema validation and conversion to ``ScenarioConfig``.

Every field is required and unknown fields are rejected, so a config file
on its own pins down a run. Optional parts (blockage, rain, a manual sigma,
a fixed iteration count) are written as ``null`` when unused.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from .association import SolverConfig
from .channel import RadioConfig, RainModel
from .scenario import BlockageConfig, LayoutConfig, ScenarioConfig, UserConfig, canonical_scheme

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` holds ``(field_path, message)`` pairs."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = problems
        super().__init__("; ".join(f"{p}: {m}" for p, m in problems))


@dataclass(frozen=True)
class RunSpec:
    scenario: ScenarioConfig
    schemes: tuple[str, ...]


def load_schema() -> dict:
    return json.loads(resources.files("mmwave_assoc").joinpath("data/config.schema.json").read_text())


def _path(parts) -> str:
    return ".".join(str(p) for p in parts) or "<root>"


def _problems(error: jsonschema.ValidationError) -> list[tuple[str, str]]:
    base = list(error.absolute_path)
    if error.validator == "required":
        missing = [k for k in error.validator_value if k not in error.instance]
        return [(_path(base + [k]), "required field is missing") for k in missing]
    if error.validator == "additionalProperties":
        allowed = set(error.schema.get("properties", {}))
        extra = [k for k in error.instance if k not in allowed]
        return [(_path(base + [k]), "unknown field") for k in extra]
    if error.validator == "oneOf" and error.context:
        # report the closest branch instead of the generic "not valid under any"
        best = jsonschema.exceptions.best_match(error.context)
        return [(_path(base + list(best.relative_path)), best.message)]
    return [(_path(base), error.message)]


def validate(doc: dict) -> None:
    validator = jsonschema.Draft202012Validator(load_schema())
    problems = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path))):
        problems.extend(_problems(err))
    if problems:
        raise ConfigError(problems)


def _build(doc: dict) -> RunSpec:
    r, lay, u, sol, ex = doc["radio"], doc["layout"], doc["users"], doc["solver"], doc["experiment"]
    problems = []

    def section(name, fn):
        try:
            return fn()
        except ValueError as exc:
            problems.append((name, str(exc)))
            return None

    radio = section("radio", lambda: RadioConfig(**r))
    layout = LayoutConfig(**lay)
    section("layout", layout.build)
    users = section("users", lambda: UserConfig(**u))
    blockage = None if doc["blockage"] is None else section("blockage", lambda: BlockageConfig(**doc["blockage"]))
    rain = None if doc["rain"] is None else section("rain", lambda: RainModel(**doc["rain"]))
    solver = section("solver", lambda: SolverConfig(penalty_m=sol["penalty_m"], mode=sol["mode"],
                                                    time_limit=sol["time_limit_s"],
                                                    node_limit=sol["node_limit"],
                                                    gap_tolerance=sol["gap_tolerance"],
                                                    overhead_in_rate=sol["overhead_in_rate"]))
    if problems:
        raise ConfigError(problems)
    scenario = ScenarioConfig(radio=radio, layout=layout, users=users, blockage=blockage, rain=rain,
                              solver=solver, sigma_deg=doc["beam_align"]["sigma_deg"], seed=ex["seed"],
                              iterations=ex["iterations"], target_total_users=ex["target_total_users"],
                              reassociate=ex["reassociate"])
    schemes = tuple(dict.fromkeys(canonical_scheme(s) for s in ex["schemes"]))
    return RunSpec(scenario, schemes)


def parse_config(doc: dict) -> RunSpec:
    validate(doc)
    return _build(doc)


def load_config(path) -> RunSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError([("<root>", f"not valid JSON: {exc}")]) from exc
    return parse_config(doc)


def to_dict(spec: RunSpec) -> dict:
    """Inverse of ``parse_config``; the output validates against the schema."""
    cfg = spec.scenario
    r = cfg.radio
    radio = {k: getattr(r, k) for k in ("f_c_ghz", "w_hz", "p_tx_dbm", "n0_dbm", "nf_db", "gamma_min_db",
                                        "r_min_bps", "xi", "theta_b_deg", "theta_u_deg", "s",
                                        "sf_los_std_db", "sf_nlos_std_db")}
    radio["s"] = "inf" if r.unbounded else int(r.s)
    lay = cfg.layout
    u = cfg.users
    b = cfg.blockage
    s = cfg.solver
    return {
        "schema_version": SCHEMA_VERSION,
        "radio": radio,
        "layout": {"width_m": lay.width_m, "height_m": lay.height_m, "isd_m": lay.isd_m,
                   "height_offset_m": lay.height_offset_m},
        "users": {"lambda_u": u.lambda_u, "generator": u.generator.value, "n_parents": u.n_parents,
                  "cluster_radius_m": u.cluster_radius_m},
        "blockage": None if b is None else {"target_fraction": b.target_fraction,
                                            "length_range_m": list(b.length_range_m),
                                            "width_range_m": list(b.width_range_m)},
        "rain": None if cfg.rain is None else {"rate_mm_h": cfg.rain.rate_mm_h, "k": cfg.rain.k,
                                               "alpha": cfg.rain.alpha},
        "solver": {"penalty_m": s.penalty_m, "mode": s.mode.value, "time_limit_s": s.time_limit,
                   "node_limit": s.node_limit, "gap_tolerance": s.gap_tolerance, "overhead_in_rate": s.overhead_in_rate},
        "beam_align": {"sigma_deg": cfg.sigma_deg},
        "experiment": {"seed": cfg.seed, "iterations": cfg.iterations,
                       "target_total_users": cfg.target_total_users, "reassociate": cfg.reassociate,
                       "schemes": list(spec.schemes)},
    }


def default_spec() -> RunSpec:
    """Defaults of the reference deployment: 24 BSs, 750 users/km^2, three heuristics."""
    return RunSpec(ScenarioConfig(), ("beam_align", "snr_one", "snr_dynamic"))
