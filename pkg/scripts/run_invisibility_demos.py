#!/usr/bin/env python3
"""Run every invisibility fixture demo and summarize the results.

Checks the triangular-prism vortex, the nested-ball family over several
radius ratios, and the bump gradients at two half-widths: each should
produce an exterior potential indistinguishable from zero relative to the
field's magnitude. Exits nonzero if any fixture comes out visible.
"""

import argparse
import sys
from pathlib import Path

from boxmag.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--out", default="invisibility_results",
                        help="output directory (default invisibility_results/)")
    parser.add_argument("--points", type=int, default=20,
                        help="exterior sample points per fixture (default 20)")
    parser.add_argument("--rtol", type=float, default=1e-8,
                        help="quadrature tolerance (default 1e-8)")
    args = parser.parse_args()

    runs = [("triangle", [])]
    runs += [("balls", ["--alpha", str(a)]) for a in (0.3, 0.5, 0.8)]
    runs += [("bump", ["--a", str(a)]) for a in (0.25, 0.5)]

    failures = 0
    for i, (fixture, extra) in enumerate(runs):
        out = Path(args.out) / f"{i:02d}_{fixture}"
        print(f"--- {fixture} {' '.join(extra)}")
        code = cli_main(["invisible-demo", fixture, "--out", str(out),
                         "--points", str(args.points), "--rtol", str(args.rtol)]
                        + extra)
        failures += code != 0
    print(f"\n{len(runs) - failures}/{len(runs)} fixtures invisible")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
