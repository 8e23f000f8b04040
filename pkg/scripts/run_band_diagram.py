#!/usr/bin/env python3
"""Dispersion surfaces on the standard vertex path plus a BZ grid.

Emits bands.csv (kx, ky, b, mu) ready for external plotting.
"""
import argparse
import sys
from pathlib import Path

from honeybloch.cli import main

HERE = Path(__file__).resolve().parent

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(HERE / "configs" / "bands.ini"))
    ap.add_argument("-o", "--out", default="out/bands")
    args = ap.parse_args()
    sys.exit(main(["bands", args.config, "-o", args.out]))
