#!/usr/bin/env python3
"""Band-edge packet against the homogenized quadratic flow.

Compares the spread field and its second moments with the constant-tensor
prediction; writes report.json.
"""
import argparse
import sys
from pathlib import Path

from honeybloch.cli import main

HERE = Path(__file__).resolve().parent

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(HERE / "configs" / "effmass.ini"))
    ap.add_argument("-o", "--out", default="out/effmass")
    args = ap.parse_args()
    sys.exit(main(["effmass", args.config, "-o", args.out]))
