"""Produce the plot data for the evaluation figures as CSV/JSON under one output directory.

Each experiment is a ``sweep`` or ``run`` of the CLI on a variant of the base
configuration, so every cell directory carries its own manifest.

    python3 scripts/reproduce_figures.py --config configs/default.json --out results/figures
    python3 scripts/reproduce_figures.py --config configs/desk.json --only beamwidth,schemes --iterations 5
"""

import argparse
import json
import sys
from pathlib import Path

from mmwave_assoc.cli import main as cli

ROOT = Path(__file__).resolve().parents[1]
DENSITIES = "100,250,500,750,1000"
HEURISTICS = ["beam_align", "snr_one", "snr_dynamic"]


def _variant(base: dict, out: Path, name: str, **edits) -> Path:
    doc = json.loads(json.dumps(base))
    for dotted, value in edits.items():
        section, key = dotted.split("__") if "__" in dotted else (dotted, None)
        if key is None:
            doc[section] = value
        else:
            doc[section][key] = value
    path = out / f"{name}.config.json"
    path.write_text(json.dumps(doc, indent=2))
    return path


def experiments(base: dict, out: Path, with_optimal: bool):
    schemes = (["optimal"] if with_optimal else []) + HEURISTICS
    joined = ",".join(schemes)
    yield "beamwidth", ["sweep", _variant(base, out, "beamwidth"), "--schemes", "beam_align",
                        "--grid", f"theta_b_deg=5,10,15;lambda_u={DENSITIES}"]
    yield "shares", ["sweep", _variant(base, out, "shares"), "--schemes", joined,
                     "--grid", f"s=1,2,5,10,inf;lambda_u={DENSITIES}"]
    yield "schemes", ["sweep", _variant(base, out, "schemes"), "--schemes", joined, "--grid", f"lambda_u={DENSITIES}"]
    blocked = _variant(base, out, "blockage",
                       blockage={"target_fraction": 0.1, "length_range_m": [5, 20], "width_range_m": [5, 20]})
    yield "blockage", ["sweep", blocked, "--schemes", joined, "--grid", f"lambda_u={DENSITIES}"]
    rain = _variant(base, out, "rain", rain={"rate_mm_h": 2.5, "k": 0.124, "alpha": 1.061})
    yield "rain", ["sweep", rain, "--schemes", joined, "--grid", f"rain_mm_h=0,2.5,150;lambda_u={DENSITIES}"]
    matern = _variant(base, out, "matern", users__generator="matern")
    yield "clustered", ["sweep", matern, "--schemes", joined, "--grid", f"lambda_u={DENSITIES}"]
    yield "connect_map", ["run", _variant(base, out, "connect_map"), "--schemes", joined, "--focal-bs", "0"]


def run(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=str(ROOT / "configs" / "default.json"))
    p.add_argument("--out", default=str(ROOT / "results" / "figures"))
    p.add_argument("--iterations", type=int, help="override the per-cell iteration count")
    p.add_argument("--seed", type=int)
    p.add_argument("--only", help="comma list of experiment names")
    p.add_argument("--with-optimal", action="store_true", help="include the exact scheme (desk scale only)")
    args = p.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base = json.loads(Path(args.config).read_text())
    wanted = set(args.only.split(",")) if args.only else None
    for name, argv_ in experiments(base, out, args.with_optimal):
        if wanted and name not in wanted:
            continue
        argv_ = [str(a) for a in argv_] + ["--out-dir", str(out / name)]
        if args.iterations is not None:
            argv_ += ["--iterations", str(args.iterations)]
        if args.seed is not None:
            argv_ += ["--seed", str(args.seed)]
        print(f"== {name}")
        code = cli(argv_)
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(run())
