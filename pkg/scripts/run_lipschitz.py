#!/usr/bin/env python3
"""Random-pair survey of the relative eigenvalue Lipschitz quotient.

Writes lipschitz.csv (per-band maxima) and report.json.
"""
import argparse
import sys
from pathlib import Path

from honeybloch.cli import main

HERE = Path(__file__).resolve().parent

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(HERE / "configs" / "lipschitz.ini"))
    ap.add_argument("-o", "--out", default="out/lipschitz")
    args = ap.parse_args()
    sys.exit(main(["lipschitz", args.config, "-o", args.out]))
