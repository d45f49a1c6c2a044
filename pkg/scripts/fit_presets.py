"""Print the synthetic material coefficients behind the formula presets.

The a_i are fitted so that the Arrhenius formulas reproduce the laboratory
(A1, A2, A3) triples at eps_dot = 1; the relative misfit is printed for each
temperature.

Usage:
    python3 scripts/fit_presets.py
"""

from __future__ import annotations

from dataclasses import asdict

from dislocation_dde.coefficients import KELVIN_OFFSET, material_coefficients_at
from dislocation_dde.scenarios import CAPTION_COEFFICIENTS, fitted_material


def main() -> None:
    for name, rows in CAPTION_COEFFICIENTS.items():
        mat = fitted_material(name)
        print(f"== {name}")
        for k, v in asdict(mat).items():
            print(f"  {k:>6} = {v:.9g}")
        for T_C, target in rows.items():
            A1, A2, A3, Z, rho_cr = material_coefficients_at(mat, T_C + KELVIN_OFFSET, 1.0)
            misfit = max(abs(a / b - 1) for a, b in zip((A1, A2, A3), target))
            print(f"  T={T_C} C: A1={A1:.6e} A2={A2:.6g} A3={A3:.6e} rho_cr={rho_cr:.4e} "
                  f"(max rel misfit {misfit:.1e})")


if __name__ == "__main__":
    main()
