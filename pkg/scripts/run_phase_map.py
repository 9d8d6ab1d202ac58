#!/usr/bin/env python3
"""Sweep the shipped 12-point (p, q) lattice and print the agreement table."""

import argparse
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]

from chemoflow.cli import cmd_phase_map


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/phase_map")
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--spec", default=str(REPO / "configs" / "phase_map_n3.json"))
    args = ap.parse_args()
    code = cmd_phase_map(args.spec, args.out, args.workers)
    print(Path(args.out, "phase_map.csv").read_text())
    return code


if __name__ == "__main__":
    sys.exit(main())
