#!/usr/bin/env python3
"""Single-band transport check: measured drift velocity against the band
gradient at the carrier.  Writes trajectory.csv and report.json.
"""
import argparse
import sys
from pathlib import Path

from honeybloch.cli import main

HERE = Path(__file__).resolve().parent

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(HERE / "configs" / "ballistic.ini"))
    ap.add_argument("-o", "--out", default="out/ballistic")
    args = ap.parse_args()
    sys.exit(main(["ballistic", args.config, "-o", args.out]))
