"""Run the acceptance suite and print one PASS/FAIL line per criterion.

    python scripts/run_acceptance.py            # all criteria
    python scripts/run_acceptance.py -k "4 or 8"  # fast subset
"""
import argparse
import pathlib
import sys

import pytest

root = pathlib.Path(__file__).resolve().parents[1]

ap = argparse.ArgumentParser()
ap.add_argument("-k", default=None, help="criterion numbers, pytest -k syntax on numbers")
args = ap.parse_args()
cmd = [str(root / "tests" / "test_acceptance.py"), "-q", "-s", "-p", "no:cacheprovider"]
if args.k:
    expr = " ".join(f"criterion_{t}" if t.isdigit() else t for t in args.k.split())
    cmd += ["-k", expr]
sys.exit(pytest.main(cmd))
