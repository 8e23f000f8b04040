#!/usr/bin/env python3
"""Locate and certify the conical crossing; print the velocity estimates.

Writes dirac_point.json with the degeneracy data, the three velocity
estimates, and the cone-fit residual table.
"""
import argparse
import json
import sys
from pathlib import Path

from honeybloch.cli import main

HERE = Path(__file__).resolve().parent

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(HERE / "configs" / "scaling.ini"))
    ap.add_argument("-o", "--out", default="out/dirac")
    args = ap.parse_args()
    rc = main(["dirac-point", args.config, "-o", args.out])
    report = Path(args.out) / "dirac_point.json"
    if report.exists():
        data = json.loads(report.read_text())
        lam = data["lambda_sharp"]
        print(f"mu_star = {data['mu_star']:.12f}")
        print(f"|lambda| = {abs(complex(lam['re'], lam['im'])):.9f}")
        print(f"cone slope = {data['estimates']['cone_fit']:.9f}")
    sys.exit(rc)
