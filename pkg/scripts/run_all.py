#!/usr/bin/env python3
"""Drive every experiment at the checked-in configurations.

Writes one output directory per experiment under --out (default: out/).
The corrupted-drift criticality run is a negative control and is expected
to exit 2; every other run should exit 0.
"""

import argparse
import os
import sys

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(REPO, "src"))

from nsvlab.cli import main as cli_main  # noqa: E402

RUNS = [
    ("fields-check", []),
    ("ns-solve", []),
    ("simulate", []),
    ("action", []),
    ("bridge", []),
    ("measure-preservation", []),
    ("minimality", []),
    ("criticality", []),
    ("criticality", ["--drift", "corrupted:0.5", "--negative-control"]),
]


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out")
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()

    failures = []
    for i, (experiment, extra) in enumerate(RUNS):
        tag = experiment if not extra else f"{experiment}-negative"
        outdir = os.path.join(args.out, tag)
        argv = [
            experiment,
            "--config", os.path.join(REPO, "configs", f"{experiment}.json"),
            "--out", outdir,
            *extra,
        ]
        if args.seed is not None:
            argv += ["--seed", str(args.seed)]
        print(f"=== [{i + 1}/{len(RUNS)}] nsvlab {' '.join(argv)}")
        code = cli_main(argv)
        expected = 2 if extra else 0
        if code != expected:
            failures.append((tag, code, expected))
    for tag, code, expected in failures:
        print(f"UNEXPECTED: {tag} exited {code}, expected {expected}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
