#!/usr/bin/env python3
"""Run the bundled simulation sweeps and write their CSV tables.

Covers the availability grid (validation probability vs density and
threshold) and the delay grid (non-cryptographic delay vs ring size).
Both are deterministic; re-running reproduces the files byte for byte.

    python scripts/run_sim_sweep.py --out-dir results/
"""

import argparse
import pathlib
import sys

from echoring.sim import load_scenario, rows_to_csv, sweep

SCENARIOS = ("availability.scenario", "delay-vs-ring.scenario")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", default="results")
    parser.add_argument("--scenario-dir",
                        default=pathlib.Path(__file__).resolve().parent.parent / "scenarios")
    args = parser.parse_args(argv)

    out_dir = pathlib.Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in SCENARIOS:
        scenario, spec = load_scenario(pathlib.Path(args.scenario_dir) / name)
        rows = sweep(
            scenario,
            vehicle_counts=spec.vehicle_counts,
            thresholds=spec.thresholds,
            ring_sizes=spec.ring_sizes,
            runs=spec.runs,
        )
        target = out_dir / (name.replace(".scenario", "") + ".csv")
        target.write_text(rows_to_csv(rows), encoding="utf-8")
        print(f"wrote {target}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
