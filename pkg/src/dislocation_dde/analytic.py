"""Reference solutions of the simplified DDE for a8 in {0, 1}.

On every delay interval ``[n t_cr, (n+1) t_cr]`` the equation is linear in the
unknown once the previous interval is known::

    rho' = q(t) - p(t) rho,
    rho(t) = exp(-P(t)) * (rho(n t_cr) + int exp(P(s)) q(s) ds),  P = int p.

For a8 = 0: ``p = B``, ``q = A - C phi_{n-1}(t - t_cr)``.
For a8 = 1: ``p = B + C phi_{n-1}(t - t_cr)``, ``q = A``.

Each interval is tabulated on equispaced nodes by cumulative adaptive Simpson
quadrature; between nodes the solution is a cubic Hermite interpolant whose
slopes come from the right-hand side itself. Pointwise evaluation with full
quadrature (``IntervalSolution.exact``) is available for spot checks.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .coefficients import CoefficientTrack
from .errors import DomainError
from .quadrature import QuadratureConfig, adaptive_simpson, cumulative_simpson


@dataclass(frozen=True)
class ConstantModel:
    """Constant-coefficient model ``rho' = A1 - A2 rho - A3 rho^a8 1(t>t_cr) rho(t - t_cr)``.

    Construction only checks signs; :meth:`check_ordering` enforces
    ``0 <= rho0 < rho_cr < A1/A2`` which the critical-time formula needs.
    """

    A1: float
    A2: float
    A3: float
    a8: float = 0.0
    rho0: float = 0.0
    rho_cr: float = 1.0

    def __post_init__(self):
        if self.A1 < 0 or self.A2 <= 0 or self.A3 < 0:
            raise DomainError("need A1 >= 0, A2 > 0, A3 >= 0")
        if not 0 <= self.a8 <= 1:
            raise DomainError("a8 must lie in [0, 1]")
        if self.rho0 < 0:
            raise DomainError("rho0 must be nonnegative")

    @property
    def plateau(self) -> float:
        return self.A1 / self.A2

    @property
    def ratio(self) -> float:
        return self.A3 / self.A2

    @property
    def stable(self) -> bool:
        """True when the boundedness assumption ``A3/A2 < 1`` holds."""
        return self.ratio < 1.0

    def check_ordering(self):
        if not (0 <= self.rho0 < self.rho_cr < self.plateau):
            raise DomainError(
                f"need 0 <= rho0 < rho_cr < A1/A2, got rho0={self.rho0}, "
                f"rho_cr={self.rho_cr}, A1/A2={self.plateau}"
            )

    def replace(self, **changes) -> "ConstantModel":
        return ConstantModel(**{**self.__dict__, **changes})


def t_cr_constant(model: ConstantModel) -> float:
    """Closed-form first time at which the pre-delay solution hits rho_cr."""
    model.check_ordering()
    P = model.plateau
    return math.log((model.rho0 - P) / (model.rho_cr - P)) / model.A2


def phi0_constant(model: ConstantModel, t):
    """Pre-delay solution ``A1/A2 + (rho0 - A1/A2) exp(-A2 t)`` on ``[0, t_cr]``."""
    t_cr = t_cr_constant(model)
    ta = np.asarray(t, dtype=float)
    slack = 1e-12 * t_cr
    if np.any(ta < -slack) or np.any(ta > t_cr + slack):
        raise DomainError(f"t outside [0, t_cr={t_cr}]")
    return _phi0_closed(model, t)


def _phi0_closed(model, t):
    P = model.plateau
    return P + (model.rho0 - P) * np.exp(-model.A2 * np.asarray(t, dtype=float))


# ---------------------------------------------------------------------------
# interval tabulation


class HermiteTable:
    """Cubic Hermite interpolant on equispaced nodes over ``[a, b]``."""

    def __init__(self, a, b, values, slopes):
        self.a = float(a)
        self.b = float(b)
        self.values = np.asarray(values, dtype=float)
        self.slopes = np.asarray(slopes, dtype=float)
        self.panels = self.values.size - 1
        self.dx = (self.b - self.a) / self.panels

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        s = (t - self.a) / self.dx
        i = np.clip(np.floor(s).astype(np.int64), 0, self.panels - 1)
        th = s - i
        y0, y1 = self.values[i], self.values[i + 1]
        m0, m1 = self.slopes[i] * self.dx, self.slopes[i + 1] * self.dx
        th2 = th * th
        th3 = th2 * th
        out = (
            (2 * th3 - 3 * th2 + 1) * y0
            + (th3 - 2 * th2 + th) * m0
            + (-2 * th3 + 3 * th2) * y1
            + (th3 - th2) * m1
        )
        return out if out.ndim else float(out)

    def node_index(self, t: float) -> int:
        return min(max(int(math.floor((t - self.a) / self.dx)), 0), self.panels - 1)

    def node(self, i: int) -> float:
        return self.a + i * self.dx


class IntervalSolution:
    """Solution on one delay interval, tabulated plus exact pointwise access.

    Attributes:
        index: interval number ``n``.
        t_start, t_end: interval end points.
        method: ``"closed-form"`` or ``"quadrature"``.
        error_bound: accumulated quadrature error estimate, including the
            estimates carried over from earlier intervals.
    """

    def __init__(self, index, table: HermiteTable, method, error_bound, exact_fn):
        self.index = index
        self.table = table
        self.method = method
        self.error_bound = error_bound
        self._exact = exact_fn

    @property
    def t_start(self) -> float:
        return self.table.a

    @property
    def t_end(self) -> float:
        return self.table.b

    def __call__(self, t):
        return self.table(t)

    def exact(self, t: float) -> float:
        """Evaluate at ``t`` with quadrature from the nearest node (slow)."""
        return self._exact(float(t))


def _vec(f):
    return lambda x: float(np.asarray(f(np.array([x])))[0])


def _linear_interval(index, a, b, rho_a, p, q, q_cfg, p_const=None, prev_bound=0.0):
    """Tabulate ``rho' = q - p rho`` on ``[a, b]`` with ``rho(a) = rho_a``.

    ``p`` and ``q`` are vectorized callables of time. If ``p_const`` is given,
    ``P(t) = p_const (t - a)`` is used in closed form.
    """
    panels = q_cfg.nodes
    tol = dict(abs_tol=q_cfg.abs_tol, rel_tol=q_cfg.rel_tol, max_depth=q_cfg.max_depth)
    err = 0.0

    if p_const is not None:
        def P_fn(t):
            return p_const * (np.asarray(t, dtype=float) - a)
        nodes = np.linspace(a, b, panels + 1)
        P_nodes = P_fn(nodes)
    else:
        nodes, P_nodes, e = cumulative_simpson(p, a, b, panels, **tol)
        err += e
        P_fn = HermiteTable(a, b, P_nodes, p(nodes))

    def integrand(s):
        return np.exp(P_fn(s)) * q(s)

    _, J_nodes, e = cumulative_simpson(integrand, a, b, panels, **tol)
    values = np.exp(-P_nodes) * (rho_a + J_nodes)
    err += float(np.max(np.exp(-P_nodes)) * e)
    slopes = q(nodes) - p(nodes) * values
    table = HermiteTable(a, b, values, slopes)

    p_s, integrand_s = _vec(p), _vec(integrand)

    def exact(t):
        if not (a - 1e-9 * (b - a) <= t <= b + 1e-9 * (b - a)):
            raise DomainError(f"t={t} outside interval [{a}, {b}]")
        i = table.node_index(t)
        t_i = float(nodes[i])
        if p_const is not None:
            P_t = p_const * (t - a)
        else:
            P_t = P_nodes[i] + adaptive_simpson(p_s, t_i, t, **tol).value
        J_t = J_nodes[i] + adaptive_simpson(integrand_s, t_i, t, **tol).value
        return math.exp(-P_t) * (rho_a + J_t)

    return IntervalSolution(index, table, "quadrature", err + prev_bound, exact)


class AnalyticSolution:
    """Interval-by-interval reference solution, built lazily and cached.

    Args:
        a8: 0 or 1.
        t_cr: delay length.
        rho0: initial density.
        field: vectorized callable ``t -> (A, B, C)`` of effective coefficients.
        q_cfg: quadrature settings.
        constant: the ``(A, B, C)`` triple when coefficients are constant;
            enables closed-form pieces.
        max_intervals: how many intervals may be built (``None`` = unlimited).
    """

    def __init__(self, a8, t_cr, rho0, field, q_cfg=QuadratureConfig(),
                 constant=None, max_intervals=None):
        if a8 not in (0, 1):
            raise DomainError("analytic reference exists only for a8 in {0, 1}")
        if not t_cr > 0:
            raise DomainError("t_cr must be positive")
        self.a8 = int(a8)
        self.t_cr = float(t_cr)
        self.rho0 = float(rho0)
        self.field = field
        self.q_cfg = q_cfg
        self.constant = constant
        self.max_intervals = max_intervals
        self._intervals: list[IntervalSolution] = []

    @classmethod
    def from_model(cls, model: ConstantModel, q_cfg=QuadratureConfig()):
        A, B, C = model.A1, model.A2, model.A3

        def field(t):
            one = np.ones_like(np.asarray(t, dtype=float))
            return A * one, B * one, C * one

        cap = q_cfg.max_intervals_a8_1 if model.a8 == 1 else None
        return cls(model.a8, t_cr_constant(model), model.rho0, field, q_cfg,
                   constant=(A, B, C), max_intervals=cap)

    @classmethod
    def from_track(cls, track: CoefficientTrack, rho0, t_cr, a8=None, q_cfg=QuadratureConfig()):
        a8 = track.a8 if a8 is None else a8
        constant = None
        if track.provenance == "constant":
            constant = tuple(float(np.asarray(v)) for v in track.field(0.0))
        cap = q_cfg.max_intervals_a8_1 if a8 == 1 else None
        return cls(a8, t_cr, rho0, track.field, q_cfg, constant=constant, max_intervals=cap)

    def interval(self, n: int) -> IntervalSolution:
        if n < 0:
            raise DomainError("interval index must be nonnegative")
        if self.max_intervals is not None and n >= self.max_intervals:
            raise DomainError(
                f"interval {n} exceeds the configured cap of {self.max_intervals} "
                "intervals for the a8=1 recursion"
            )
        while len(self._intervals) <= n:
            self._intervals.append(self._build(len(self._intervals)))
        return self._intervals[n]

    def _build(self, n):
        a, b = n * self.t_cr, (n + 1) * self.t_cr
        if n == 0:
            return self._build_first(a, b)
        prev = self._intervals[n - 1]
        rho_a = float(prev.table.values[-1])
        t_cr = self.t_cr
        field = self.field
        if self.a8 == 0:
            def p(t):
                return field(t)[1]

            def q(t):
                A, _, C = field(t)
                return A - C * prev(np.asarray(t) - t_cr)

            p_const = self.constant[1] if self.constant else None
        else:
            def p(t):
                _, B, C = field(t)
                return B + C * prev(np.asarray(t) - t_cr)

            def q(t):
                return field(t)[0]

            p_const = None
        return _linear_interval(n, a, b, rho_a, p, q, self.q_cfg, p_const, prev.error_bound)

    def _build_first(self, a, b):
        if self.constant is not None:
            A, B, _ = self.constant
            model = ConstantModel(A, B, 0.0, rho0=self.rho0, rho_cr=np.inf)
            nodes = np.linspace(a, b, self.q_cfg.nodes + 1)
            values = _phi0_closed(model, nodes)
            table = HermiteTable(a, b, values, A - B * values)
            return IntervalSolution(0, table, "closed-form", 0.0,
                                    lambda t: float(_phi0_closed(model, t)))

        def p(t):
            return self.field(t)[1]

        def q(t):
            return self.field(t)[0]

        return _linear_interval(0, a, b, self.rho0, p, q, self.q_cfg)

    def rhs(self, t, y, n):
        """Right-hand side on interval ``n`` at ``(t, y)``."""
        A, B, C = self.field(t)
        z = self.interval(n - 1)(np.asarray(t) - self.t_cr) if n >= 1 else 0.0
        return A - B * y - C * (y if self.a8 == 1 else 1.0) * z

    def __call__(self, t):
        """Vectorized evaluation; ``t = n t_cr`` belongs to interval ``n``."""
        t = np.asarray(t, dtype=float)
        idx = np.maximum(np.floor(t / self.t_cr).astype(np.int64), 0)
        out = np.empty_like(t)
        for n in np.unique(idx):
            mask = idx == n
            if self.max_intervals is not None and n >= self.max_intervals:
                # the node at the right end of the last allowed interval
                last = self.max_intervals - 1
                edge = np.isclose(t[mask], (last + 1) * self.t_cr, rtol=1e-12, atol=0)
                if not np.all(edge):
                    self.interval(int(n))
                out[mask] = self.interval(last)(t[mask])
                continue
            out[mask] = self.interval(int(n))(t[mask])
        return out if out.ndim else float(out)

    def on_interval(self, n: int, t):
        return self.interval(n)(t)


@lru_cache(maxsize=64)
def _cached_model_solution(model: ConstantModel, q_cfg: QuadratureConfig) -> AnalyticSolution:
    return AnalyticSolution.from_model(model, q_cfg)


def _check_in_interval(t, n, t_cr):
    slack = 1e-12 * t_cr * (n + 1)
    if not (n * t_cr - slack <= t <= (n + 1) * t_cr + slack):
        raise DomainError(f"t={t} is not in interval {n} = [{n * t_cr}, {(n + 1) * t_cr}]")


def analytic_a8_0(model: ConstantModel, n: int, t: float, q: QuadratureConfig = QuadratureConfig()) -> float:
    """Reference value on interval ``n`` for a8 = 0 (quadrature-exact)."""
    if model.a8 != 0:
        raise DomainError("analytic_a8_0 needs a8 = 0")
    sol = _cached_model_solution(model, q)
    _check_in_interval(t, n, sol.t_cr)
    return sol.interval(n).exact(t)


def analytic_a8_1(model: ConstantModel, n: int, t: float, q: QuadratureConfig = QuadratureConfig()) -> float:
    """Reference value on interval ``n`` for a8 = 1 (quadrature-exact)."""
    if model.a8 != 1:
        raise DomainError("analytic_a8_1 needs a8 = 1")
    sol = _cached_model_solution(model, q)
    _check_in_interval(t, n, sol.t_cr)
    return sol.interval(n).exact(t)


# ---------------------------------------------------------------------------
# time-dependent coefficients


@lru_cache(maxsize=32)
def _phi0_track(track: CoefficientTrack, rho0: float, horizon: float, q_cfg: QuadratureConfig):
    def p(t):
        return track.field(t)[1]

    def q(t):
        return track.field(t)[0]

    p_const = None
    if track.provenance == "constant":
        p_const = float(np.asarray(track.field(0.0)[1]))
    return _linear_interval(0, 0.0, horizon, rho0, p, q, q_cfg, p_const)


def _default_horizon(track, t):
    return max(track.t_last, float(np.max(t)) if np.size(t) else 0.0, 1e-300)


def phi0_timedep(track: CoefficientTrack, rho0: float, t, q: QuadratureConfig = QuadratureConfig(), horizon=None):
    """Pre-delay solution with time-dependent coefficients.

    Scalars use full quadrature; arrays use the tabulated interpolant.
    """
    if np.any(np.asarray(t) < 0):
        raise DomainError("t must be nonnegative")
    H = float(horizon) if horizon is not None else _default_horizon(track, t)
    sol = _phi0_track(track, float(rho0), H, q)
    if np.ndim(t) == 0:
        return sol.exact(float(t))
    return sol(t)


def t_cr_timedep(
    track: CoefficientTrack,
    rho0: float,
    rho_cr_fn: Callable | None = None,
    q: QuadratureConfig = QuadratureConfig(),
    horizon: float | None = None,
) -> float | None:
    """First time the pre-delay solution reaches the critical density.

    Scans the tabulated pre-delay solution for the first node where
    ``rho - rho_cr >= 0`` and bisects inside that panel with quadrature-exact
    evaluations down to ``1e-12 * horizon``. Returns ``None`` when no crossing
    occurs within the horizon.
    """
    if rho_cr_fn is None:
        rho_cr_fn = track.rho_cr
    H = float(horizon) if horizon is not None else track.t_last
    if not H > 0:
        raise DomainError("a positive horizon is needed to search for t_cr")
    sol = _phi0_track(track, float(rho0), H, q)
    nodes = np.linspace(0.0, H, q.nodes + 1)
    g = sol.table.values - np.asarray(rho_cr_fn(nodes), dtype=float)
    hits = np.flatnonzero(g >= 0)
    if hits.size == 0:
        return None
    i = int(hits[0])
    if i == 0:
        return 0.0

    def g_exact(t):
        return sol.exact(t) - float(np.asarray(rho_cr_fn(t)))

    lo, hi = float(nodes[i - 1]), float(nodes[i])
    while hi - lo > 1e-12 * H:
        mid = 0.5 * (lo + hi)
        if g_exact(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def analytic_timedep(
    track: CoefficientTrack,
    a8: int,
    n: int,
    t: float,
    rho0: float,
    t_cr: float,
    q: QuadratureConfig = QuadratureConfig(),
) -> float:
    """Reference value on interval ``n`` with time-dependent coefficients."""
    sol = _cached_track_solution(track, a8, float(rho0), float(t_cr), q)
    _check_in_interval(t, n, t_cr)
    return sol.interval(n).exact(t)


@lru_cache(maxsize=32)
def _cached_track_solution(track, a8, rho0, t_cr, q):
    return AnalyticSolution.from_track(track, rho0, t_cr, a8, q)


# ---------------------------------------------------------------------------


def bernoulli_degenerate_check(model: ConstantModel, horizon: float, points: int = 1001):
    """Closed-form path when ``A1 = 0``.

    With no hardening the critical time collapses to zero and the equation
    becomes the Bernoulli equation ``rho' = -A2 rho - A3 rho^(a8+1)``. From
    ``rho0 = 0`` the solution is identically zero.

    Returns:
        ``(t, rho)`` arrays on ``points`` equispaced times in ``[0, horizon]``.
    """
    if model.A1 != 0:
        raise DomainError("the degenerate check needs A1 = 0")
    t = np.linspace(0.0, horizon, points)
    A2, A3, a8, r0 = model.A2, model.A3, model.a8, model.rho0
    if r0 == 0:
        return t, np.zeros_like(t)
    if A3 == 0 or a8 == 0:
        return t, r0 * np.exp(-(A2 + (A3 if a8 == 0 else 0.0)) * t)
    # v = rho^(-a8) satisfies v' = a8 (A2 v + A3)
    k = A3 / A2
    v = (r0 ** (-a8) + k) * np.exp(a8 * A2 * t) - k
    return t, v ** (-1.0 / a8)
