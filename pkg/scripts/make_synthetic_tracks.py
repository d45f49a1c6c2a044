"""Write the bundled synthetic flow-line tracks to data/tracks/.

The tracks are synthetic stand-ins for finite-element flow-line exports:
a 0.28 s pass with a smooth strain-rate pulse inside the roll gap, mild
deformation heating along the center line, and roll chill plus a sharper
strain-rate peak near the surface. Constant laboratory tracks (eps_dot = 1)
are written as well.

Usage:
    python3 scripts/make_synthetic_tracks.py [--out data/tracks]
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from dislocation_dde.scenarios import CAPTION_COEFFICIENTS, write_track_csv

PASS_TIME = 0.28
GAP = (0.03, 0.20)  # roll-gap entry and exit times [s]
ENTRY_RATE = 0.5  # strain rate at the start of the flow line [1/s]
ENTRY_T = {"copper": 600.0, "dp-steel": 1060.0}
NOTE = "synthetic track generated by scripts/make_synthetic_tracks.py; not measured data"


def pulse(t, start, end):
    """Smooth bump, zero outside ``[start, end]``, peak 1 at the middle."""
    s = np.clip((t - start) / (end - start), 0.0, 1.0)
    return np.sin(np.pi * s) ** 2


def progress(t, start, end):
    s = np.clip((t - start) / (end - start), 0.0, 1.0)
    return s - np.sin(2 * np.pi * s) / (2 * np.pi)


def rolling_tracks(material, n=281):
    t = np.linspace(0.0, PASS_TIME, n)
    T0 = ENTRY_T[material]
    # the flow line starts already deforming; eps_dot > 0 keeps rho_cr(0) above rho0
    entry = ENTRY_RATE * (1.0 - progress(t, 0.0, GAP[1] + 0.02))
    center = dict(
        T_C=T0 + 25.0 * progress(t, *GAP),
        eps_dot=entry + 6.0 * pulse(t, *GAP),
    )
    surface = dict(
        T_C=T0 - 90.0 * pulse(t, GAP[0] - 0.01, GAP[1] + 0.04) + 10.0 * progress(t, *GAP),
        eps_dot=entry + 9.0 * pulse(t, GAP[0], GAP[1] - 0.03) + 2.0 * pulse(t, *GAP),
    )
    return t, center, surface


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data/tracks")
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for material in ENTRY_T:
        t, center, surface = rolling_tracks(material)
        write_track_csv(out / f"{material}_center.csv", t, center["T_C"], center["eps_dot"], NOTE)
        write_track_csv(out / f"{material}_surface.csv", t, surface["T_C"], surface["eps_dot"], NOTE)
        for T_C in CAPTION_COEFFICIENTS[material]:
            tt = np.array([0.0, 2.0])
            write_track_csv(out / f"{material}_{T_C}C_constant.csv", tt, np.full(2, float(T_C)),
                            np.ones(2), NOTE)
    print(f"wrote tracks to {out}")


if __name__ == "__main__":
    main()
