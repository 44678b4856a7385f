#!/usr/bin/env python3
"""Tabulate the adversary's chance of naming at least j real signers.

One row per (threshold, ring size, j): the probability that an
adversary who picks t ring members uniformly at random catches at
least j of the t actual signers.  Exact rationals, printed as floats.

    python scripts/anonymity_table.py --ring-sizes 10,20 --thresholds 2,4,6
"""

import argparse
import sys

from echoring.sim import anonymity_prob


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--thresholds", default="2,4,6,8")
    parser.add_argument("--ring-sizes", default="20")
    parser.add_argument("--out", help="CSV path (default: stdout)")
    args = parser.parse_args(argv)

    lines = ["threshold,ring_size,found_at_least,probability"]
    for r in (int(x) for x in args.ring_sizes.split(",")):
        for t in (int(x) for x in args.thresholds.split(",")):
            if t > r:
                continue
            for j in range(1, t + 1):
                p = anonymity_prob(t, r, j)
                lines.append(f"{t},{r},{j},{float(p)!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
