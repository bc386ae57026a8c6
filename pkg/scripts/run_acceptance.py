#!/usr/bin/env python3
"""
Acceptance run: platoon scenario, fixed ages 1..4, noise scales 2..10.

Calibrates the variance convention, compares model and simulation on the
whole grid, and exits 3 when fewer than AOI_ACCEPTANCE_FRACTION of the
cells fall inside their confidence interval.
"""
import argparse
import sys
from pathlib import Path

# Add project root to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from app.main import main

if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    parser.add_argument("--scenario", default=str(project_root / "scenarios" / "platoon.json"))
    parser.add_argument("--out", default=str(project_root / "results" / "acceptance.csv"))
    parser.add_argument("--threads", default="4")
    parser.add_argument("--executor", choices=["thread", "process"], default="process")
    args = parser.parse_args()

    print(f"🧪 Running acceptance grid from {args.scenario}")
    code = main([
        "compare",
        "--scenario", args.scenario,
        "--convention", "auto",
        "--acceptance",
        "--threads", args.threads,
        "--executor", args.executor,
        "--out", args.out,
    ])
    print("✅ Acceptance passed" if code == 0 else f"❌ Acceptance failed (exit {code})")
    sys.exit(code)
