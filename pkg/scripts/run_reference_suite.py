#!/usr/bin/env python3
"""Run the three reference configurations (blow-up, bounded, global) and
print one summary line each."""

import argparse
import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]

from chemoflow.cli import cmd_simulate


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/reference")
    args = ap.parse_args()
    worst = 0
    for name in ("ftbu_reference", "gb_reference", "ge_reference"):
        out = Path(args.out) / name
        code = cmd_simulate(str(REPO / "configs" / f"{name}.json"), str(out))
        summary = json.loads((out / "summary.json").read_text())
        print(f"{name}: exit={code} verdict={summary['verdict']} "
              f"final_sup_u={summary['final_u_max']:.4g} "
              f"mass_drift={summary['mass_drift_u']:.2e}")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
