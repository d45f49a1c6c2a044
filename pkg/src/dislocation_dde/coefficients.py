"""Physical coefficient formulas of the dislocation-density model.

All quantities are SI except stresses, which are in MPa (with the shear
modulus in MPa). Temperatures are absolute; track files in Celsius are
converted on ingestion.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, FormatError

R_GAS = 8.314
KELVIN_OFFSET = 273.15


@dataclass(frozen=True)
class MaterialCoefficients:
    """Model coefficients a1..a13 together with b, mu, Q and D.

    The units of a1..a5 and a12 are whatever the formulas imply; they are
    stored as plain numbers.
    """

    a1: float = 1.0
    a2: float = 1.0
    a3: float = 0.0
    a4: float = 1.0
    a5: float = 0.0
    a6: float = 1.0
    a7: float = 0.0
    a8: float = 0.0
    a9: float = 0.0
    a10: float = 1.0
    a11: float = 1e4
    a12: float = 0.0
    a13: float = 0.0
    b: float = 2.5e-10
    mu: float = 45000.0
    Q: float = 0.0
    D: float = 1e-4

    def __post_init__(self):
        for name in ("a8", "a9"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name}={v} must lie in [0, 1]")
        for name in ("b", "mu", "D"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")

    @property
    def R_gas(self) -> float:
        return R_GAS

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class ProcessState:
    t: float
    T: float
    eps_dot: float
    eps: float = 0.0

    def __post_init__(self):
        if not self.T > 0:
            raise DomainError("absolute temperature must be positive")
        if self.eps_dot < 0:
            raise DomainError("strain rate must be nonnegative")


def _check_temperature(T):
    if np.any(np.asarray(T) <= 0):
        raise DomainError("absolute temperature must be positive")


def zener_hollomon(eps_dot, T, Q):
    """Temperature-compensated strain rate ``eps_dot * exp(Q / (R T))``."""
    _check_temperature(T)
    if np.any(np.asarray(eps_dot) < 0):
        raise DomainError("strain rate must be nonnegative")
    return eps_dot * np.exp(Q / (R_GAS * np.asarray(T, dtype=float)))


def free_path(eps_dot, Z, a1, a13):
    """Mean free path of dislocations; exactly zero while not deforming."""
    eps_dot = np.asarray(eps_dot, dtype=float)
    Z = np.asarray(Z, dtype=float)
    active = eps_dot > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        l = np.where(active, a1 * np.power(np.where(active, Z, 1.0), -a13), 0.0)
    return l if l.ndim else float(l)


def coeff_A1(b, l, eps_dot):
    """Hardening coefficient ``1 / (b l)``, zero for ``eps_dot == 0``."""
    if not b > 0:
        raise DomainError("Burgers vector must be positive")
    l = np.asarray(l, dtype=float)
    eps_dot = np.asarray(eps_dot, dtype=float)
    active = eps_dot > 0
    if np.any(active & (l <= 0)):
        raise DomainError("positive strain rate requires a positive free path")
    with np.errstate(divide="ignore"):
        A1 = np.where(active, 1.0 / (b * np.where(active, l, 1.0)), 0.0)
    return A1 if A1.ndim else float(A1)


def coeff_A2(a2, a3, T):
    """Recovery coefficient ``a2 exp(-a3 / (R T))``."""
    _check_temperature(T)
    return a2 * np.exp(-a3 / (R_GAS * np.asarray(T, dtype=float)))


def coeff_A3(a4, a5, mu, b, D, T):
    """Grain-boundary mobility ``a4 mu b^2 / (2 D) exp(-a5 / (R T))``."""
    _check_temperature(T)
    if not D > 0:
        raise DomainError("grain size must be positive")
    return a4 * mu * b * b / (2.0 * D) * np.exp(-a5 / (R_GAS * np.asarray(T, dtype=float)))


def rho_critical(a10, a11, a12, Z):
    """Critical dislocation density ``a11 + a12 Z^a10``."""
    if np.any(np.asarray(Z) < 0):
        raise DomainError("Zener-Hollomon parameter must be nonnegative")
    return a11 + a12 * np.power(Z, a10)


def flow_stress(rho, a6, a7, b, mu):
    """Flow stress ``a7 + a6 b mu sqrt(rho)`` in MPa."""
    if np.any(np.asarray(rho) < 0):
        raise DomainError("dislocation density must be nonnegative")
    return a7 + a6 * b * mu * np.sqrt(rho)


def material_coefficients_at(material: MaterialCoefficients, T, eps_dot):
    """Evaluate (A1, A2, A3, Z, rho_cr) at absolute temperature ``T``."""
    m = material
    Z = zener_hollomon(eps_dot, T, m.Q)
    l = free_path(eps_dot, Z, m.a1, m.a13)
    A1 = coeff_A1(m.b, l, eps_dot)
    A2 = coeff_A2(m.a2, m.a3, T)
    A3 = coeff_A3(m.a4, m.a5, m.mu, m.b, m.D, T)
    rho_cr = rho_critical(m.a10, m.a11, m.a12, Z)
    return A1, A2, A3, Z, rho_cr


@dataclass(frozen=True, eq=False)
class CoefficientTrack:
    """Time-parametrized coefficients ``t -> (A1, A2, A3, eps_dot, T)``.

    Three provenances are supported:

    * ``"constant"``: every column is a single value.
    * ``"formula"``: T and eps_dot are interpolated piecewise linearly and
      A1, A2, A3, rho_cr come from the material formulas at the
      interpolated state.
    * ``"tabulated"``: all columns are interpolated directly.

    Queries outside ``[t[0], t[-1]]`` clamp to the end values. The exponent
    ``a9`` and the nonlinearity ``a8`` travel with the track so that the
    effective field can be formed without the material record.
    """

    t: np.ndarray
    T: np.ndarray
    eps_dot: np.ndarray
    provenance: str
    a8: float = 0.0
    a9: float = 0.0
    material: MaterialCoefficients | None = None
    A1: np.ndarray | None = None
    A2: np.ndarray | None = None
    A3: np.ndarray | None = None
    rho_cr_values: np.ndarray | None = None
    bounds: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.provenance not in ("constant", "formula", "tabulated"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if not 0 <= self.a8 <= 1 or not 0 <= self.a9 <= 1:
            raise DomainError("a8 and a9 must lie in [0, 1]")
        if self.provenance == "formula" and self.material is None:
            raise ValueError("formula tracks need material coefficients")
        if not self.bounds:
            self.bounds.update(self._sample_bounds())

    # construction -------------------------------------------------------

    @classmethod
    def constant(cls, A1, A2, A3, eps_dot=1.0, T=1000.0, rho_cr=None, a8=0.0, a9=0.0):
        arr = lambda v: None if v is None else np.array([float(v)])
        return cls(
            t=np.array([0.0]), T=arr(T), eps_dot=arr(eps_dot), provenance="constant",
            a8=a8, a9=a9, A1=arr(A1), A2=arr(A2), A3=arr(A3), rho_cr_values=arr(rho_cr),
        )

    @classmethod
    def tabulated(cls, t, A1, A2, A3, eps_dot, T=None, rho_cr=None, a8=0.0, a9=0.0):
        t = _check_times(t)
        col = lambda v: np.broadcast_to(np.asarray(v, dtype=float), t.shape).copy()
        return cls(
            t=t, T=col(1000.0 if T is None else T), eps_dot=col(eps_dot),
            provenance="tabulated", a8=a8, a9=a9, A1=col(A1), A2=col(A2), A3=col(A3),
            rho_cr_values=None if rho_cr is None else col(rho_cr),
        )

    # evaluation ---------------------------------------------------------

    def _interp(self, column, t):
        if column.size == 1:
            return np.full(np.shape(t), column[0]) if np.ndim(t) else float(column[0])
        return np.interp(t, self.t, column)

    def state(self, t):
        """Return ``(A1, A2, A3, eps_dot, T)`` at time(s) ``t``."""
        T = self._interp(self.T, t)
        eps_dot = self._interp(self.eps_dot, t)
        if self.provenance == "formula":
            A1, A2, A3, _, _ = material_coefficients_at(self.material, T, eps_dot)
        else:
            A1 = self._interp(self.A1, t)
            A2 = self._interp(self.A2, t)
            A3 = self._interp(self.A3, t)
        return A1, A2, A3, eps_dot, T

    def zener(self, t):
        T = self._interp(self.T, t)
        eps_dot = self._interp(self.eps_dot, t)
        return zener_hollomon(eps_dot, T, self.material.Q if self.material else 0.0)

    def rho_cr(self, t):
        if self.provenance == "formula":
            m = self.material
            return rho_critical(m.a10, m.a11, m.a12, self.zener(t))
        if self.rho_cr_values is None:
            raise DomainError("track carries no critical density")
        return self._interp(self.rho_cr_values, t)

    def field(self, t):
        """Effective ``(A, B, C)`` of ``rho' = A - B rho - C rho^a8 R``.

        ``A = A1 eps_dot``, ``B = A2 eps_dot^(1 - a9)``, ``C = A3``.
        """
        A1, A2, A3, eps_dot, _ = self.state(t)
        return A1 * eps_dot, A2 * np.power(eps_dot, 1.0 - self.a9), A3

    @property
    def t_first(self) -> float:
        return float(self.t[0])

    @property
    def t_last(self) -> float:
        return float(self.t[-1])

    def _sample_bounds(self):
        if self.t.size == 1:
            probe = np.array([0.0])
        else:
            probe = np.concatenate(
                [np.linspace(a, b, 33)[:-1] for a, b in zip(self.t[:-1], self.t[1:])]
                + [self.t[-1:]]
            )
        A1, A2, A3, eps_dot, T = self.state(probe)
        out = {}
        for name, col in (("A1", A1), ("A2", A2), ("A3", A3), ("eps_dot", eps_dot), ("T", T)):
            col = np.atleast_1d(col)
            if not np.all(np.isfinite(col)) or np.any(col < 0):
                raise DomainError(f"track column {name} is not finite and nonnegative")
            out[name] = (float(col.min()), float(col.max()))
        return out


def _check_times(t):
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise FormatError("a track needs at least two samples")
    bad = np.flatnonzero(np.diff(t) <= 0)
    if bad.size:
        raise FormatError("sample times must be strictly increasing", row=int(bad[0]) + 2)
    return t


def track_from_samples(
    samples: Sequence[Iterable[float]],
    material: MaterialCoefficients,
    a8: float | None = None,
    a9: float | None = None,
) -> CoefficientTrack:
    """Build a formula-driven track from ``(t, T [K], eps_dot)`` samples."""
    arr = np.asarray([tuple(s) for s in samples], dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise FormatError("samples must be (t, T, eps_dot) triples")
    t = _check_times(arr[:, 0])
    if np.any(arr[:, 1] <= 0):
        raise DomainError("absolute temperature must be positive")
    if np.any(arr[:, 2] < 0):
        raise DomainError("strain rate must be nonnegative")
    return CoefficientTrack(
        t=t, T=arr[:, 1].copy(), eps_dot=arr[:, 2].copy(), provenance="formula",
        a8=material.a8 if a8 is None else a8, a9=material.a9 if a9 is None else a9,
        material=material,
    )
