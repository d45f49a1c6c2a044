"""Material presets, track ingestion and full-model scenario runs.

Two kinds of presets exist:

* composite presets carry ``(A1, A2, A3)`` directly for one laboratory
  temperature (``copper-575``, ``dp-steel-1100``, ...). The track only
  supplies the strain rate, which scales the coefficients as in the model.
* formula presets (``copper``, ``dp-steel``) carry coefficients ``a1..a13``
  and evaluate ``A_i(T, eps_dot)`` along the track. Their ``a_i`` are
  synthetic: an Arrhenius fit through the composite values at the three
  laboratory temperatures, for an assumed activation energy, grain size
  and critical-density law. They reproduce the composite values at
  ``eps_dot = 1`` but are not measured material data.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .coefficients import (
    KELVIN_OFFSET,
    R_GAS,
    CoefficientTrack,
    MaterialCoefficients,
    flow_stress,
    track_from_samples,
)
from .errors import DomainError, FormatError
from .integrators import SolutionPath, canonical_method, detect_t_cr, solve_full_model

DEFAULT_RHO0 = 1e4
# critical density of composite presets as a fraction of the plateau A1/A2
COMPOSITE_RHO_CR_FRACTION = 0.9973

# laboratory coefficients (T in Celsius, eps_dot = 1)
CAPTION_COEFFICIENTS = {
    "copper": {
        575: (5.35882e14, 11.134, 9.9962e-14),
        625: (3.91516e14, 12.9833, 3.30145e-13),
        675: (2.95672e14, 14.8963, 9.61261e-13),
    },
    "dp-steel": {
        1000: (3.93394e14, 7.17277, 6.41439e-7),
        1100: (3.34986e14, 12.7284, 1.49657e-6),
        1200: (2.91544e14, 20.895, 3.11231e-6),
    },
}

# exponents, moduli and the assumed physical constants of the formula presets
MATERIAL_BASE = {
    "copper": dict(a8=1.0, a9=0.0, mu=45000.0, b=2.56e-10, D=5e-5, Q=3.0e5, T_ref_C=600.0),
    "dp-steel": dict(a8=0.45239, a9=0.13751, mu=75000.0, b=2.48e-10, D=3e-5, Q=3.0e5, T_ref_C=1060.0),
}
# rho_cr = a11 + a12 Z^a10 with a10 = RHO_CR_EXPONENT_FACTOR * a13, scaled so
# that rho_cr equals RHO_CR_REF_FRACTION of the plateau at (T_ref, eps_dot = 1)
RHO_CR_EXPONENT_FACTOR = 2.0
RHO_CR_REF_FRACTION = 0.5
A11 = 1e4


@dataclass(frozen=True)
class MaterialPreset:
    """Material record plus optional composite coefficients.

    Attributes:
        name: preset name.
        kind: ``"formula"``, ``"composite"`` or ``"custom"``.
        material: coefficients ``a1..a13, b, mu, Q, D`` (a8, a9 included).
        composite: ``(A1, A2, A3)`` at ``eps_dot = 1`` for composite presets.
        rho_cr: critical density for composite presets.
    """

    name: str
    kind: str
    material: MaterialCoefficients
    composite: tuple | None = None
    rho_cr: float | None = None

    def __post_init__(self):
        if self.kind not in ("formula", "composite", "custom"):
            raise DomainError(f"unknown preset kind {self.kind!r}")
        if self.composite is not None:
            if len(self.composite) != 3 or any(not (c >= 0 and math.isfinite(c)) for c in self.composite):
                raise DomainError("composite coefficients must be three finite nonnegative numbers")
            if self.composite[1] <= 0:
                raise DomainError("composite A2 must be positive")
            if self.rho_cr is None:
                object.__setattr__(self, "rho_cr",
                                   COMPOSITE_RHO_CR_FRACTION * self.composite[0] / self.composite[1])

    @property
    def a8(self) -> float:
        return self.material.a8

    @property
    def a9(self) -> float:
        return self.material.a9

    @property
    def mu(self) -> float:
        return self.material.mu

    @property
    def plateau(self) -> float | None:
        return None if self.composite is None else self.composite[0] / self.composite[1]

    def with_overrides(self, **kw) -> "MaterialPreset":
        mat_keys = set(MaterialCoefficients.keys())
        mat = {k: v for k, v in kw.items() if k in mat_keys}
        rest = {k: v for k, v in kw.items() if k not in mat_keys}
        out = replace(self, material=replace(self.material, **mat)) if mat else self
        return replace(out, **rest) if rest else out


def arrhenius_fit(T_C: Sequence[float], values: Sequence[float]) -> tuple[float, float]:
    """Least-squares fit ``ln v = c0 + c1 / T`` (T in K); returns ``(c0, c1)``."""
    invT = 1.0 / (np.asarray(T_C, dtype=float) + KELVIN_OFFSET)
    c1, c0 = np.polyfit(invT, np.log(np.asarray(values, dtype=float)), 1)
    return float(c0), float(c1)


def fitted_material(name: str) -> MaterialCoefficients:
    """Synthetic ``a_i`` reproducing the laboratory coefficients at ``eps_dot = 1``.

    ``A1 = Z^a13 / (b a1)`` gives ``a13 Q / R`` as the slope in ``1/T``;
    ``A2 = a2 exp(-a3/RT)`` and ``A3 = a4 mu b^2/(2D) exp(-a5/RT)`` are
    fitted the same way.
    """
    base = MATERIAL_BASE[name]
    rows = CAPTION_COEFFICIENTS[name]
    T_C = list(rows)
    A1, A2, A3 = (np.array([rows[t][i] for t in T_C]) for i in range(3))
    b, D, mu, Q = base["b"], base["D"], base["mu"], base["Q"]

    c0, c1 = arrhenius_fit(T_C, A1)
    a13 = c1 * R_GAS / Q
    a1 = math.exp(-c0) / b
    c0, c1 = arrhenius_fit(T_C, A2)
    a2, a3 = math.exp(c0), -c1 * R_GAS
    c0, c1 = arrhenius_fit(T_C, A3)
    a4, a5 = math.exp(c0) * 2.0 * D / (mu * b * b), -c1 * R_GAS

    a10 = RHO_CR_EXPONENT_FACTOR * a13
    T_ref = base["T_ref_C"] + KELVIN_OFFSET
    Z_ref = math.exp(Q / (R_GAS * T_ref))
    plateau_ref = (Z_ref ** a13 / (b * a1)) / (a2 * math.exp(-a3 / (R_GAS * T_ref)))
    a12 = (RHO_CR_REF_FRACTION * plateau_ref - A11) / Z_ref ** a10

    return MaterialCoefficients(
        a1=a1, a2=a2, a3=a3, a4=a4, a5=a5, a6=1.0, a7=0.0, a8=base["a8"], a9=base["a9"],
        a10=a10, a11=A11, a12=a12, a13=a13, b=b, mu=mu, Q=Q, D=D,
    )


def _composite_preset(name: str, T_C: int) -> MaterialPreset:
    base = MATERIAL_BASE[name]
    mat = MaterialCoefficients(a8=base["a8"], a9=base["a9"], mu=base["mu"], b=base["b"],
                               D=base["D"], Q=base["Q"], a11=A11)
    return MaterialPreset(f"{name}-{T_C}", "composite", mat, CAPTION_COEFFICIENTS[name][T_C])


def preset_names() -> list[str]:
    names = list(CAPTION_COEFFICIENTS)
    for mat, rows in CAPTION_COEFFICIENTS.items():
        names += [f"{mat}-{t}" for t in rows]
    return names


def get_preset(name: str) -> MaterialPreset:
    """Look up a built-in preset by name (``copper``, ``dp-steel-1100``, ...)."""
    key = name.strip().lower()
    if key in CAPTION_COEFFICIENTS:
        return MaterialPreset(key, "formula", fitted_material(key))
    for mat, rows in CAPTION_COEFFICIENTS.items():
        for t in rows:
            if key == f"{mat}-{t}":
                return _composite_preset(mat, t)
    raise DomainError(f"unknown preset {name!r}; choose from {preset_names()}")


# ---------------------------------------------------------------------------
# file formats


def read_key_values(path) -> dict[str, str]:
    """Flat ``key=value`` file; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(f"expected key=value, got {raw.strip()!r}", row=lineno)
            k, v = (s.strip() for s in line.split("=", 1))
            if not k:
                raise FormatError("empty key", row=lineno)
            out[k] = v
    return out


_PRESET_EXTRA = ("A1", "A2", "A3", "rho_cr")


def load_preset_file(path) -> MaterialPreset:
    """Preset from ``key=value`` lines with keys ``a1..a13, b, mu, Q, D``.

    Optional keys: ``name``, ``base`` (a built-in preset to start from) and
    ``A1, A2, A3, rho_cr`` for composite coefficients.
    """
    kv = read_key_values(path)
    base = get_preset(kv.pop("base")) if "base" in kv else None
    name = kv.pop("name", Path(path).stem)
    allowed = set(MaterialCoefficients.keys()) | set(_PRESET_EXTRA)
    values = {}
    for k, v in kv.items():
        if k not in allowed:
            raise FormatError(f"unknown preset key {k!r}")
        try:
            values[k] = float(v)
        except ValueError:
            raise FormatError(f"value of {k!r} is not a number: {v!r}") from None
    extra = {k: values.pop(k) for k in _PRESET_EXTRA if k in values}
    if base is not None:
        material = replace(base.material, **values)
        composite, rho_cr = base.composite, base.rho_cr
    else:
        material = MaterialCoefficients(**values)
        composite, rho_cr = None, None
    if any(k in extra for k in ("A1", "A2", "A3")):
        if not all(k in extra for k in ("A1", "A2", "A3")):
            raise FormatError("composite presets need all of A1, A2, A3")
        composite = (extra["A1"], extra["A2"], extra["A3"])
        rho_cr = None
    rho_cr = extra.get("rho_cr", rho_cr)
    kind = "custom" if base is None else base.kind
    return MaterialPreset(name, kind if composite is None or kind == "composite" else "composite",
                          material, composite, rho_cr)


def load_track_csv(path) -> np.ndarray:
    """Read a ``t,T_C,eps_dot`` track; returns an ``(n, 3)`` array with T in K.

    Raises:
        FormatError: bad header, non-numeric cells, or times that are not
            strictly increasing. ``row`` is the line number in the file.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"track file not found: {path}")
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "T_C", "eps_dot"]:
            raise FormatError("header must be t,T_C,eps_dot", row=1)
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != 3:
                raise FormatError(f"expected 3 columns, got {len(rec)}", row=lineno)
            try:
                t, T_C, ed = (float(c) for c in rec)
            except ValueError:
                raise FormatError(f"non-numeric value in {rec!r}", row=lineno) from None
            if not all(math.isfinite(v) for v in (t, T_C, ed)):
                raise FormatError("non-finite value", row=lineno)
            if rows and t <= rows[-1][1][0]:
                raise FormatError("times must be strictly increasing", row=lineno)
            rows.append((lineno, (t, T_C + KELVIN_OFFSET, ed)))
    if len(rows) < 2:
        raise FormatError("a track needs at least two samples")
    for lineno, (_, T, ed) in rows:
        if T <= 0:
            raise DomainError(f"line {lineno}: absolute temperature must be positive")
        if ed < 0:
            raise DomainError(f"line {lineno}: strain rate must be nonnegative")
    return np.array([r for _, r in rows])


def write_track_csv(path, t, T_C, eps_dot, comment: str | None = None):
    """Write a track file; ``comment`` goes into a sidecar ``.txt`` note."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "T_C", "eps_dot"])
        for row in zip(t, T_C, eps_dot):
            w.writerow([f"{v:.17g}" for v in row])
    if comment:
        Path(path).with_suffix(".txt").write_text(comment + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# scenario runs


def build_track(preset: MaterialPreset, samples: np.ndarray) -> CoefficientTrack:
    """Coefficient track for ``(t, T [K], eps_dot)`` samples."""
    samples = np.asarray(samples, dtype=float)
    if preset.composite is None:
        return track_from_samples(samples, preset.material)
    t, T, ed = samples[:, 0], samples[:, 1], samples[:, 2]
    A1, A2, A3 = preset.composite
    return CoefficientTrack.tabulated(t, A1, A2, A3, ed, T=T, rho_cr=preset.rho_cr,
                                      a8=preset.a8, a9=preset.a9)


SCENARIO_COLUMNS = ("t", "rho", "sigma_f", "A1", "A2", "A3", "T", "eps_dot")


@dataclass(frozen=True, eq=False)
class ScenarioResult:
    """Full-model path with derived flow stress and coefficient columns."""

    preset: str
    path: SolutionPath
    series: dict
    t_cr: float | None
    rho_at_t_cr: float | None
    flags: dict
    plateau: float | None
    meta: dict = field(default_factory=dict)

    @property
    def t(self) -> np.ndarray:
        return self.series["t"]

    @property
    def rho(self) -> np.ndarray:
        return self.series["rho"]

    @property
    def sigma_f(self) -> np.ndarray:
        return self.series["sigma_f"]

    def summary(self) -> dict:
        return {
            "preset": self.preset,
            "t_cr": self.t_cr,
            "rho_at_t_cr": self.rho_at_t_cr,
            "rho_max": float(np.max(self.rho)),
            "rho_end": float(self.rho[-1]),
            "plateau": self.plateau,
            "flags": dict(self.flags),
            **self.meta,
        }

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SCENARIO_COLUMNS)
            cols = [self.series[c] for c in SCENARIO_COLUMNS]
            for row in zip(*cols):
                w.writerow([repr(float(v)) for v in row])

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")


def read_scenario_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != SCENARIO_COLUMNS:
            raise FormatError(f"unexpected scenario header {header}", row=1)
        data = [[float(c) for c in rec] for rec in reader if rec]
    arr = np.array(data, dtype=float).reshape(-1, len(SCENARIO_COLUMNS))
    return {c: arr[:, i].copy() for i, c in enumerate(SCENARIO_COLUMNS)}


def _load_samples(track):
    if isinstance(track, (str, Path)):
        return load_track_csv(track)
    return np.asarray(track, dtype=float)


def run_scenario(
    preset: MaterialPreset | str,
    track,
    rho0: float = DEFAULT_RHO0,
    method: str = "rk4",
    N: int = 1000,
    horizon: float | None = None,
    t_cr: float | None = None,
) -> ScenarioResult:
    """Detect the critical time, solve the full model and derive flow stress.

    Args:
        preset: preset or preset name.
        track: path to a ``t,T_C,eps_dot`` CSV or an ``(n, 3)`` array with
            T in kelvin.
        rho0: initial density.
        method: integrator name.
        N: steps per delay interval.
        horizon: end time; defaults to the last track sample.
        t_cr: skip detection and use this delay.
    """
    if isinstance(preset, str):
        preset = get_preset(preset)
    if not rho0 >= 0:
        raise DomainError("rho0 must be nonnegative")
    method = canonical_method(method)
    samples = _load_samples(track)
    ctrack = build_track(preset, samples)
    if horizon is None:
        horizon = ctrack.t_last
    if not horizon > 0:
        raise DomainError("horizon must be positive")

    rho_hit = None
    # no deformation anywhere on the track: nothing to recrystallize
    deforming = bool(np.any(samples[:, 2] > 0))
    if t_cr is None and deforming:
        hit = detect_t_cr(ctrack, rho0, horizon)
        if hit is not None:
            if hit.t <= 0:
                raise DomainError("rho0 already exceeds the critical density")
            t_cr, rho_hit = float(hit.t), float(hit.rho)
    path = solve_full_model(ctrack, rho0, horizon, method, N, t_cr=t_cr, detect=deforming)

    t, rho = path.flat()
    A1, A2, A3, ed, T = (np.broadcast_to(np.asarray(c, dtype=float), t.shape).copy()
                         for c in ctrack.state(t))
    m = preset.material
    sigma = flow_stress(np.maximum(rho, 0.0), m.a6, m.a7, m.b, m.mu)
    series = {"t": t, "rho": rho, "sigma_f": np.asarray(sigma, dtype=float),
              "A1": A1, "A2": A2, "A3": A3, "T": T, "eps_dot": ed}

    A, B, _ = (np.broadcast_to(c, t.shape) for c in ctrack.field(t))
    active = B > 0
    plateau = float(np.max(A[active] / B[active])) if np.any(active) else None
    flags = {"went_negative": path.went_negative, "exceeded_bound": path.exceeded_bound,
             "recrystallized": path.recrystallized}
    meta = {"method": method, "N": N, "rho0": rho0, "horizon": horizon,
            "a8": preset.a8, "a9": preset.a9}
    return ScenarioResult(preset.name, path, series, t_cr if path.recrystallized else None,
                          rho_hit, flags, plateau, meta)


@dataclass(frozen=True)
class LineComparison:
    first: str | None
    t_cr_center: float | None
    t_cr_surface: float | None
    text: str


NO_RX = "no recrystallization within horizon"


def compare_lines(center: ScenarioResult, surface: ScenarioResult, rel_tie: float = 1e-9) -> LineComparison:
    """Which flow line reaches the critical density first."""
    tc, ts = center.t_cr, surface.t_cr
    if tc is None and ts is None:
        return LineComparison(None, tc, ts, f"center: {NO_RX}; surface: {NO_RX}")
    if tc is None:
        return LineComparison("surface", tc, ts,
                              f"surface reaches rho_cr first (t_cr={ts:.6g} s); center: {NO_RX}")
    if ts is None:
        return LineComparison("center", tc, ts,
                              f"center reaches rho_cr first (t_cr={tc:.6g} s); surface: {NO_RX}")
    if abs(tc - ts) <= rel_tie * max(abs(tc), abs(ts)):
        return LineComparison("tie", tc, ts, f"tie: both lines reach rho_cr at t_cr={tc:.6g} s")
    first = "center" if tc < ts else "surface"
    return LineComparison(first, tc, ts,
                          f"{first} reaches rho_cr first: t_cr center={tc:.6g} s, "
                          f"surface={ts:.6g} s (ratio surface/center={ts / tc:.4f})")
