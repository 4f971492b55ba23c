#!/usr/bin/env python3
"""Tabulate the pinned-bridge action against the horizon cutoff.

The action over [0, 1 - eps] grows like (1/2) log(1/eps); successive
halvings of the cutoff add about (1/2) log 2 each. Prints a table of
estimates for a few ensemble sizes alongside the closed form
S(eps) = (1/2)(log(1/eps) - 1 + eps).
"""

import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src"))

from nsvlab.action import action_prefixes  # noqa: E402
from nsvlab.sde import brownian_bridge  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 4000])
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    j_levels = list(range(3, 9))
    M = 2**13 - 2**5
    closed = {j: 0.5 * (np.log(2.0**j) - 1 + 2.0**-j) for j in j_levels}
    print(f"{'j':>3} {'closed':>9}", *(f"{f'N={n}':>16}" for n in args.sizes))
    tables = []
    for n in args.sizes:
        ens = brownian_bridge(0.0, 0.0, N=n, M=M, cutoff=2.0**-8, seed=args.seed)
        steps = [round((1 - 2.0**-j) / ens.dt) for j in j_levels]
        tables.append(action_prefixes(ens, steps))
    for i, j in enumerate(j_levels):
        row = [f"{j:>3} {closed[j]:>9.4f}"]
        for col in tables:
            row.append(f"{col[i].value:>9.4f} +-{col[i].std_error:5.3f}")
        print(" ".join(row))
    return 0


if __name__ == "__main__":
    sys.exit(main())
