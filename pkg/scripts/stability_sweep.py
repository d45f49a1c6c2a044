"""Oscillation classification over a range of A3 for cases (iv) and (v).

Usage:
    python3 scripts/stability_sweep.py [--points 25] [--N 1000] [--out results/stability.csv]
"""

from __future__ import annotations

import argparse
import csv
from pathlib import Path

import numpy as np

from dislocation_dde.error_harness import CASES, stability_scan

# A3 ranges of the broken-assumption experiments
RANGES = {"iv": (0.9, 1.5), "v": (0.5, 5.0)}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=25)
    ap.add_argument("--N", type=int, default=1000)
    ap.add_argument("--out", default="results/stability.csv")
    args = ap.parse_args()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case", "A3", "ratio", "label", "sign_changes", "growth"])
        for label, (lo, hi) in RANGES.items():
            for r in stability_scan(CASES[label].model, np.linspace(lo, hi, args.points), args.N):
                g = "" if r.growth is None else f"{r.growth:.6g}"
                w.writerow([label, f"{r.A3:.6g}", f"{r.ratio:.6g}", r.label, r.sign_changes, g])
                print(f"({label}) A3={r.A3:<7.4g} A3/A2={r.ratio:<7.4g} {r.label:<20} growth={g or '-'}")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
