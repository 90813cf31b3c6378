"""Derive the beam-align misalignment thresholds and optionally install them as the shipped table.

    python3 scripts/calibrate.py                      # desk-scale grid, writes results/sigma_table.json
    python3 scripts/calibrate.py --install            # ... and copies it into the package data
"""

import argparse
import shutil
import sys
from pathlib import Path

from mmwave_assoc.cli import main as cli

ROOT = Path(__file__).resolve().parents[1]
SHIPPED = ROOT / "src" / "mmwave_assoc" / "data" / "sigma_table.json"


def run(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=str(ROOT / "configs" / "desk.json"))
    p.add_argument("--theta", default="5,10,15")
    p.add_argument("--lambda-u", default="100,250,500,750,1000")
    p.add_argument("--out", default=str(ROOT / "results" / "sigma_table.json"))
    p.add_argument("--install", action="store_true", help="overwrite the shipped table with the result")
    args = p.parse_args(argv)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    code = cli(["calibrate", args.config, "--theta", args.theta, "--lambda-u", args.lambda_u, "--out", args.out])
    if code == 0 and args.install:
        shutil.copyfile(args.out, SHIPPED)
        print(f"installed {SHIPPED}")
    return code


if __name__ == "__main__":
    sys.exit(run())
