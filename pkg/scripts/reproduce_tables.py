"""Error tables for the benchmark cases.

Writes ``convergence_<case>.csv`` and ``.txt`` for every case (or the ones
given with ``--cases``) into ``--out``.

Usage:
    python3 scripts/reproduce_tables.py [--cases ii,vii] [--out results/tables]
"""

from __future__ import annotations

import argparse
import time
from pathlib import Path

from dislocation_dde.error_harness import CASES, run_case


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cases", default=",".join(CASES))
    ap.add_argument("--out", default="results/tables")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for label in [c.strip() for c in args.cases.split(",") if c.strip()]:
        t0 = time.perf_counter()
        report = run_case(label)
        report.to_csv(out / f"convergence_{label}.csv")
        table = report.text_table()
        (out / f"convergence_{label}.txt").write_text(table, encoding="utf-8")
        print(table)
        print(f"[{label}] {time.perf_counter() - t0:.1f}s\n")


if __name__ == "__main__":
    main()
