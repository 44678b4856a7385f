#!/usr/bin/env python3
"""Time the three cryptographic phases over a (threshold, ring) grid.

Produces the phase-timing table: request and reply cost fall as the
threshold rises (fewer members to forge), verification cost tracks the
ring size and ignores the threshold.  Runtime is a couple of minutes at
the default grid.

    python scripts/run_phase_bench.py --out bench.csv
"""

import argparse
import sys

from echoring.bench import bench_to_csv, run_bench
from echoring.cpk import setup


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--reps", type=int, default=5)
    parser.add_argument("--thresholds", default="2,3,4,5,6,7,8,9,10")
    parser.add_argument("--ring-sizes", default="20,30,40,50")
    parser.add_argument("--out", help="CSV path (default: stdout)")
    args = parser.parse_args(argv)

    material, _ = setup(256, args.seed)
    cells = run_bench(
        material,
        [int(t) for t in args.thresholds.split(",")],
        [int(r) for r in args.ring_sizes.split(",")],
        reps=args.reps,
        seed=args.seed,
    )
    text = bench_to_csv(cells)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
