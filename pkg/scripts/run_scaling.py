#!/usr/bin/env python3
"""Envelope-accuracy study over the delta sequence 0.5, 0.25, 0.125.

Writes scaling.csv and report.json; exit status 0 means the error sequence
decreased monotonically with a positive fitted rate.  The finest run is the
expensive one (several minutes); pass a config with fewer deltas to iterate.
"""
import argparse
import sys
from pathlib import Path

from honeybloch.cli import main

HERE = Path(__file__).resolve().parent

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(HERE / "configs" / "scaling.ini"))
    ap.add_argument("-o", "--out", default="out/scaling")
    args = ap.parse_args()
    sys.exit(main(["validate", args.config, "-o", args.out]))
