#!/usr/bin/env python3
"""Build and certify the canonical blow-up subsolution, then run the
end-to-end domination experiment against the simulator.

Writes the certificate and comparison reports under --out.
"""

import argparse
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]

from chemoflow.cli import cmd_certify, cmd_compare


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out/blowup_demo")
    args = ap.parse_args()

    code = cmd_certify(3, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, "normal", False, args.out)
    if code != 0:
        return code
    return cmd_compare(str(REPO / "configs" / "compare_reference.json"), args.out)


if __name__ == "__main__":
    sys.exit(main())
