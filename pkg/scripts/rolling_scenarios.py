"""Center and surface flow lines for copper and DP steel.

Runs the formula presets along the bundled synthetic tracks, writes the
scenario CSV/JSON files and prints which line reaches the critical density
first. A second comparison uses the center track cooled by 100 K as the
surface line.

Usage:
    python3 scripts/rolling_scenarios.py [--N 1000] [--out results/rolling]
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from dislocation_dde.scenarios import compare_lines, load_track_csv, run_scenario

TRACKS = Path(__file__).resolve().parents[1] / "data" / "tracks"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=1000)
    ap.add_argument("--out", default="results/rolling")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {}
    for material in ("copper", "dp-steel"):
        center = load_track_csv(TRACKS / f"{material}_center.csv")
        surface = load_track_csv(TRACKS / f"{material}_surface.csv")
        cooled = center.copy()
        cooled[:, 1] -= 100.0
        runs = {tag: run_scenario(material, s, N=args.N)
                for tag, s in (("center", center), ("surface", surface), ("cooled", cooled))}
        for tag, res in runs.items():
            res.to_csv(out / f"{material}_{tag}.csv")
            res.to_json(out / f"{material}_{tag}.json")
        synthetic = compare_lines(runs["center"], runs["surface"])
        cooled_cmp = compare_lines(runs["center"], runs["cooled"])
        report[material] = {"synthetic_surface": synthetic.text, "cooled_center": cooled_cmp.text}
        print(f"{material}: synthetic surface -> {synthetic.text}")
        print(f"{material}: center cooled by 100 K -> {cooled_cmp.text}")
    (out / "comparison.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
