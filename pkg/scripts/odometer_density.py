#!/usr/bin/env python3
"""Drive the adding machine's boundary orbit within epsilon of seeded
targets and report the verified witnesses.

Writes results/odometer_density/density.csv via the experiment runner.
"""

import sys
from pathlib import Path

from coarselab.cli import ExperimentConfig, run

CONFIG = {
    "experiment": "odometer-density",
    "precision": "24",
    "targets": "25",
    "epsilons": "2^-4, 2^-8, 2^-12",
    "seed": "7",
}


def main() -> int:
    manifest = run(
        ExperimentConfig(raw=CONFIG, source="odometer_density"),
        out_dir=Path("results/odometer_density"),
    )
    for key, value in sorted(manifest.verdicts.items()):
        print(f"{key}: {value}")
    csv_path = Path("results/odometer_density/density.csv")
    lines = csv_path.read_text().strip().split("\n")
    print(f"wrote {csv_path} ({len(lines) - 1} rows); first rows:")
    for line in lines[:4]:
        print(" ", line)
    return 1 if manifest.verdicts.get("refuted") else 0


if __name__ == "__main__":
    sys.exit(main())
