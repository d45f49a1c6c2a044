"""Method-of-steps integrators on the delay-aligned grid.

The grid puts ``N`` steps of size ``h = t_cr / N`` in every delay interval,
so the delayed argument of node ``t_k^j`` is exactly node ``t_k^{j-1}``.
Explicit and backward Euler read delayed values straight from the stored
previous interval. RK4 additionally needs the delayed value at half steps,
which comes from a cubic Hermite interpolant of the previous interval built
from stored values and stored right-hand-side evaluations.

Problems whose right-hand side is a :class:`ModelRhs` run through compiled
kernels. Any other callable ``f(t, y, z)`` runs through a plain Python loop.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numba
import numpy as np

from .analytic import ConstantModel, t_cr_constant
from .coefficients import CoefficientTrack
from .errors import DivergenceError, DomainError, SolverError

METHODS = ("explicit-euler", "backward-euler", "rk4")
METHOD_ALIASES = {
    "euler": "explicit-euler",
    "explicit-euler": "explicit-euler",
    "explicit_euler": "explicit-euler",
    "beuler": "backward-euler",
    "backward-euler": "backward-euler",
    "backward_euler": "backward-euler",
    "implicit-euler": "backward-euler",
    "rk4": "rk4",
}


def canonical_method(name: str) -> str:
    try:
        return METHOD_ALIASES[name.strip().lower()]
    except KeyError:
        raise DomainError(f"unknown method {name!r}; choose from {sorted(METHOD_ALIASES)}") from None


# ---------------------------------------------------------------------------
# problem description


@dataclass(frozen=True)
class ModelRhs:
    """Right-hand side ``A(t) - B(t) y - C(t) g(y) h(z)`` of the density model.

    For ``a8 = 0`` the field is linear: ``g = 1`` and ``h(z) = z``. For
    ``a8 > 0`` it is the monotone extension ``g(y) = sgn(y)|y|^a8``,
    ``h(z) = |z|``, which agrees with the physical field for ``y, z >= 0``
    and stays nonincreasing in ``y`` everywhere.

    ``coeffs`` is either a constant ``(A, B, C)`` triple or a vectorized
    callable ``t -> (A, B, C)``.
    """

    coeffs: tuple | Callable
    a8: float = 0.0

    def __post_init__(self):
        if not 0 <= self.a8 <= 1:
            raise DomainError("a8 must lie in [0, 1]")

    @property
    def is_constant(self) -> bool:
        return not callable(self.coeffs)

    def at(self, t):
        if self.is_constant:
            return self.coeffs
        return self.coeffs(t)

    def __call__(self, t, y, z):
        A, B, C = self.at(t)
        if self.a8 == 0:
            return A - B * y - C * z
        g = abs(y) ** self.a8
        if y < 0:
            g = -g
        return A - B * y - C * g * abs(z)

    def arrays(self, times):
        """Coefficients on a time array, or 1x1 arrays when constant."""
        if self.is_constant:
            return tuple(np.full((1, 1), float(c)) for c in self.coeffs)
        A, B, C = self.coeffs(times)
        return tuple(np.ascontiguousarray(np.broadcast_to(c, times.shape), dtype=float)
                     for c in (A, B, C))


@dataclass(frozen=True)
class DdeProblem:
    """``y'(t) = rhs(t, y(t), y(t - t_cr))`` solved on ``n_intervals`` delay intervals.

    Args:
        rhs: ``f(t, y, z)``; a :class:`ModelRhs` enables compiled kernels.
        t_cr: delay, > 0.
        y0: initial value ``y(0)``.
        n_intervals: number of delay intervals (horizon ``n_intervals * t_cr``).
        eta: value fed to the delayed slot on the first interval. Defaults to
            ``y0`` (constant pre-history). The density model passes 0, since
            its delayed term is switched off before ``t_cr``.
        horizon: optional end time below ``n_intervals * t_cr``; the final
            interval is then truncated at the last node not exceeding it.
        bounds: optional ``(lo, hi)`` envelope used to set the
            ``exceeded_bound`` flag.
    """

    rhs: Callable
    t_cr: float
    y0: float
    n_intervals: int = 1
    eta: float | None = None
    horizon: float | None = None
    bounds: tuple | None = None

    def __post_init__(self):
        if not self.t_cr > 0 or not math.isfinite(self.t_cr):
            raise DomainError("t_cr must be positive and finite")
        if self.n_intervals < 1:
            raise DomainError("need at least one interval")
        if self.horizon is not None and not (0 < self.horizon <= self.n_intervals * self.t_cr * (1 + 1e-12)):
            raise DomainError("horizon must lie within n_intervals * t_cr")

    @property
    def history(self) -> float:
        return self.y0 if self.eta is None else self.eta

    @property
    def end(self) -> float:
        return self.n_intervals * self.t_cr if self.horizon is None else self.horizon

    def envelope(self):
        if self.bounds is not None:
            return self.bounds
        rhs = self.rhs
        if isinstance(rhs, ModelRhs):
            if rhs.is_constant:
                A, B, _ = rhs.coeffs
                if B > 0:
                    return 0.0, A / B
            else:
                ts = np.linspace(0.0, self.end, 257)
                A, B, _ = (np.broadcast_to(c, ts.shape) for c in rhs.coeffs(ts))
                if np.min(B) > 0:
                    return 0.0, float(np.max(A) / np.min(B))
        return None


@dataclass(frozen=True)
class DelayGrid:
    N: int
    t_cr: float

    def __post_init__(self):
        if self.N < 1:
            raise DomainError("N must be at least 1")

    @property
    def h(self) -> float:
        return self.t_cr / self.N

    def node(self, j: int, k: int) -> float:
        return j * self.t_cr + k * self.h

    def times(self, n_intervals: int) -> np.ndarray:
        """Node times, shape ``(n_intervals, N + 1)``."""
        j = np.arange(n_intervals)[:, None]
        k = np.arange(self.N + 1)[None, :]
        return j * self.t_cr + k * self.h


@dataclass(frozen=True, eq=False)
class SolutionPath:
    """Values ``y[j, k]`` at nodes ``t_k^j = j t_cr + k h``.

    Rows overlap at the joints (``y[j, 0] == y[j-1, N]``). When the final
    interval is truncated, entries past ``last_k`` are NaN.
    """

    grid: DelayGrid
    values: np.ndarray
    method: str
    last_k: int
    went_negative: bool = False
    exceeded_bound: bool = False
    recrystallized: bool = True

    @property
    def n_intervals(self) -> int:
        return self.values.shape[0]

    def times(self) -> np.ndarray:
        return self.grid.times(self.n_intervals)

    def valid_mask(self) -> np.ndarray:
        mask = np.ones(self.values.shape, dtype=bool)
        mask[-1, self.last_k + 1:] = False
        return mask

    def flat(self) -> tuple[np.ndarray, np.ndarray]:
        """Time-ordered series without duplicated joint nodes."""
        ts, ys = self.times(), self.values
        parts_t = [ts[0, : (self.last_k + 1 if self.n_intervals == 1 else None)]]
        parts_y = [ys[0, : (self.last_k + 1 if self.n_intervals == 1 else None)]]
        for j in range(1, self.n_intervals):
            stop = self.last_k + 1 if j == self.n_intervals - 1 else None
            parts_t.append(ts[j, 1:stop])
            parts_y.append(ys[j, 1:stop])
        return np.concatenate(parts_t), np.concatenate(parts_y)

    def rows(self):
        """``(j, k, t, y)`` for every distinct node, joints assigned left-closed."""
        N = self.grid.N
        for j in range(self.n_intervals):
            k_end = self.last_k if j == self.n_intervals - 1 else N - 1
            if j == self.n_intervals - 1:
                k_range = range(0, k_end + 1)
            else:
                k_range = range(0, N)
            for k in k_range:
                yield j, k, self.grid.node(j, k), float(self.values[j, k])

    def to_csv(self, path):
        """Write ``j,k,t,y`` rows with 17 significant digits."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["j", "k", "t", "y"])
            for j, k, t, y in self.rows():
                w.writerow([j, k, f"{t:.17g}", f"{y:.17g}"])


def _layout(problem: DdeProblem, N: int):
    grid = DelayGrid(N, problem.t_cr)
    J = problem.n_intervals
    last_k = N
    if problem.horizon is not None:
        J = max(1, int(math.ceil(problem.horizon / problem.t_cr - 1e-12)))
        rem = problem.horizon - (J - 1) * problem.t_cr
        last_k = min(N, int(math.floor(rem / grid.h + 1e-9)))
    return grid, J, last_k


def _finish(problem, grid, y, method, last_k, status):
    if status[0] >= 0:
        raise DivergenceError(int(status[0]), int(status[1]))
    y = y.copy()
    y[-1, last_k + 1:] = np.nan
    valid = y[~np.isnan(y)]
    went_negative = bool(np.any(valid < 0))
    exceeded = False
    env = problem.envelope()
    if env is not None:
        slack = 10.0 * grid.h
        lo, hi = env
        exceeded = bool(np.any(valid < lo - slack) or np.any(valid > hi * (1.0 + slack)))
    return SolutionPath(grid, y, method, last_k, went_negative, exceeded)


# ---------------------------------------------------------------------------
# compiled kernels for ModelRhs


@numba.njit(cache=True, nogil=True)
def _field(A, B, C, a8, y, z):
    if a8 == 0.0:
        return A - B * y - C * z
    g = abs(y) ** a8
    if y < 0.0:
        g = -g
    return A - B * y - C * g * abs(z)


@numba.njit(cache=True, nogil=True)
def _euler_kernel(A, B, C, a8, y0, eta, J, N, last_k, h):
    y = np.empty((J, N + 1))
    status = np.array([-1, -1])
    s = 1 if A.shape[1] > 1 else 0
    y[0, 0] = y0
    for j in range(J):
        if j > 0:
            y[j, 0] = y[j - 1, N]
        kmax = last_k if j == J - 1 else N
        for k in range(kmax):
            z = eta if j == 0 else y[j - 1, k]
            f = _field(A[j * s, k * s], B[j * s, k * s], C[j * s, k * s], a8, y[j, k], z)
            v = y[j, k] + h * f
            if not np.isfinite(v):
                status[0] = j
                status[1] = k + 1
                return y, status
            y[j, k + 1] = v
        for k in range(kmax + 1, N + 1):
            y[j, k] = np.nan
    return y, status


@numba.njit(cache=True, nogil=True)
def _implicit_model_step(A, B, C, a8, z, y_prev, h, tol, max_iter):
    # G(y) = y - y_prev - h f(y) is strictly increasing; returns (root, residual, ok)
    if a8 == 0.0:
        v = (y_prev + h * (A - C * z)) / (1.0 + h * B)
        return v, 0.0, True
    c = h * C * abs(z)
    s = 1.0 + h * B
    r = y_prev + h * A
    if a8 == 1.0 or c == 0.0:
        v = r / (s + (c if a8 == 1.0 else 0.0))
        return v, 0.0, True
    if r == 0.0:
        return 0.0, 0.0, True
    # in u = sgn(y)|y|^a8 the step equation s*phi(u) + c*u = r is smooth at
    # u = 0 (phi(u) = sgn(u)|u|^(1/a8)), unlike the cusp of |y|^a8 in y
    q = 1.0 / a8
    sign = 1.0 if r > 0.0 else -1.0
    ra = abs(r)
    lo, hi = 0.0, min(ra / c, (ra / s) ** a8)
    u = 0.5 * hi
    g = s * u ** q + c * u - ra
    g_prev = np.inf
    for _ in range(max_iter):
        # ra equals the sum of the (positive) terms at the root
        if abs(g) <= tol * ra:
            break
        if g > 0.0:
            hi = u
        else:
            lo = u
        mid = 0.5 * (lo + hi)
        cand = mid
        if abs(g) <= 0.5 * g_prev:
            slope = s * q * u ** (q - 1.0) + c
            cand = u - g / slope
            if not (lo < cand < hi):
                cand = mid
        g_prev = abs(g) if cand != mid else np.inf
        if cand == u:
            break
        u = cand
        g = s * u ** q + c * u - ra
    y = sign * u ** q
    res = abs(y - y_prev - h * _field(A, B, C, a8, y, z))
    # y-space residual is judged against its own largest term at the root
    scale = max(1.0, abs(y_prev), h * abs(A), h * B * abs(y), c * abs(u))
    return y, res, abs(g) <= tol * ra or res <= tol * scale or hi - lo <= 4e-16 * hi


@numba.njit(cache=True, nogil=True)
def _beuler_kernel(A, B, C, a8, y0, eta, J, N, last_k, h, tol, max_iter):
    y = np.empty((J, N + 1))
    status = np.array([-1, -1])
    fail = np.zeros(1)
    s = 1 if A.shape[1] > 1 else 0
    y[0, 0] = y0
    for j in range(J):
        if j > 0:
            y[j, 0] = y[j - 1, N]
        kmax = last_k if j == J - 1 else N
        for k in range(kmax):
            z = eta if j == 0 else y[j - 1, k + 1]
            v, res, ok = _implicit_model_step(
                A[j * s, (k + 1) * s], B[j * s, (k + 1) * s], C[j * s, (k + 1) * s],
                a8, z, y[j, k], h, tol, max_iter,
            )
            if not ok:
                status[0] = j
                status[1] = k + 1
                fail[0] = res
                return y, status, fail
            if not np.isfinite(v):
                status[0] = j
                status[1] = k + 1
                fail[0] = np.inf
                return y, status, fail
            y[j, k + 1] = v
        for k in range(kmax + 1, N + 1):
            y[j, k] = np.nan
    return y, status, fail


@numba.njit(cache=True, nogil=True)
def _rk4_kernel(A, B, C, Am, Bm, Cm, a8, y0, eta, J, N, last_k, h, hermite):
    y = np.empty((J, N + 1))
    d = np.empty((J, N + 1))
    status = np.array([-1, -1])
    s = 1 if A.shape[1] > 1 else 0
    y[0, 0] = y0
    for j in range(J):
        if j > 0:
            y[j, 0] = y[j - 1, N]
        z0 = eta if j == 0 else y[j - 1, 0]
        d[j, 0] = _field(A[j * s, 0], B[j * s, 0], C[j * s, 0], a8, y[j, 0], z0)
        kmax = last_k if j == J - 1 else N
        for k in range(kmax):
            if j == 0:
                zl = eta
                zm = eta
                zr = eta
            else:
                zl = y[j - 1, k]
                zr = y[j - 1, k + 1]
                zm = 0.5 * (zl + zr)
                if hermite:
                    zm += 0.125 * h * (d[j - 1, k] - d[j - 1, k + 1])
            a0, b0, c0 = A[j * s, k * s], B[j * s, k * s], C[j * s, k * s]
            am, bm, cm = Am[j * s, k * s], Bm[j * s, k * s], Cm[j * s, k * s]
            a1, b1, c1 = A[j * s, (k + 1) * s], B[j * s, (k + 1) * s], C[j * s, (k + 1) * s]
            yk = y[j, k]
            k1 = d[j, k]
            k2 = _field(am, bm, cm, a8, yk + 0.5 * h * k1, zm)
            k3 = _field(am, bm, cm, a8, yk + 0.5 * h * k2, zm)
            k4 = _field(a1, b1, c1, a8, yk + h * k3, zr)
            v = yk + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.isfinite(v):
                status[0] = j
                status[1] = k + 1
                return y, d, status
            y[j, k + 1] = v
            d[j, k + 1] = _field(a1, b1, c1, a8, v, zr)
        for k in range(kmax + 1, N + 1):
            y[j, k] = np.nan
            d[j, k] = np.nan
    return y, d, status


# ---------------------------------------------------------------------------
# generic Python loops


def _split(lo, hi):
    """Bracket split point: zero first, then geometric across wide magnitude ranges."""
    if lo < 0.0 < hi:
        return 0.0
    a, b = abs(lo), abs(hi)
    small, big = min(a, b), max(a, b)
    if big > 4.0 * small:
        mid = math.sqrt(max(small, big * 1e-300) * big)
        return mid if hi > 0.0 else -mid
    return 0.5 * (lo + hi)


def _implicit_generic(F, y_prev, h, tol, max_iter):
    G = lambda y: y - y_prev - h * F(y)
    f0 = F(y_prev)
    w = h * abs(f0) + 1e-300 + 1e-12 * abs(y_prev)
    lo, hi = y_prev - w, y_prev + w
    glo, ghi = G(lo), G(hi)
    it = 0
    while glo > 0 and it < 200:
        w *= 2
        lo = y_prev - w
        glo = G(lo)
        it += 1
    while ghi < 0 and it < 400:
        w *= 2
        hi = y_prev + w
        ghi = G(hi)
        it += 1
    if glo > 0 or ghi < 0:
        raise SolverError("could not bracket the implicit step", min(abs(glo), abs(ghi)))
    y = y_prev + h * f0
    if not lo < y < hi:
        y = 0.5 * (lo + hi)
    # iterate to a tight residual; the loose scale (terms of the step equation
    # at y_prev) is only a fallback for roundoff-limited steps
    tight = max(1.0, abs(y_prev))
    scale = max(tight, h * abs(f0))
    g = G(y)
    g_prev = math.inf
    for _ in range(max_iter):
        if abs(g) <= tol * tight:
            return y
        if g > 0:
            hi = y
        else:
            lo = y
        mid = _split(lo, hi)
        if abs(g) > 0.5 * g_prev:
            cand = mid
        else:
            dstep = abs(y) * 1e-7 if y != 0 else 1e-12 * tight
            slope = (G(y + dstep) - g) / dstep
            cand = y - g / slope if slope > 0 else mid
            if not lo < cand < hi:
                cand = mid
        g_prev = abs(g) if cand != mid else math.inf
        if cand == y or hi - lo <= 4e-16 * max(abs(lo), abs(hi)):
            return y
        y = cand
        g = G(y)
    if abs(g) <= tol * scale:
        return y
    raise SolverError(f"implicit step did not converge in {max_iter} iterations", abs(g))


def _generic(problem, N, method, tol=1e-12, max_iter=50, hermite=True):
    grid, J, last_k = _layout(problem, N)
    f, h, eta = problem.rhs, grid.h, problem.history
    y = np.full((J, N + 1), np.nan)
    d = np.full((J, N + 1), np.nan)
    y[0, 0] = problem.y0
    for j in range(J):
        if j > 0:
            y[j, 0] = y[j - 1, N]
        kmax = last_k if j == J - 1 else N
        prev = y[j - 1] if j > 0 else None
        dprev = d[j - 1] if j > 0 else None
        if method == "rk4":
            d[j, 0] = f(grid.node(j, 0), y[j, 0], eta if j == 0 else prev[0])
        for k in range(kmax):
            t = grid.node(j, k)
            t1 = grid.node(j, k + 1)
            yk = y[j, k]
            if method == "explicit-euler":
                v = yk + h * f(t, yk, eta if j == 0 else prev[k])
            elif method == "backward-euler":
                z = eta if j == 0 else prev[k + 1]
                v = _implicit_generic(lambda u: f(t1, u, z), yk, h, tol, max_iter)
            else:
                if j == 0:
                    zl = zm = zr = eta
                else:
                    zl, zr = prev[k], prev[k + 1]
                    zm = 0.5 * (zl + zr)
                    if hermite:
                        zm += 0.125 * h * (dprev[k] - dprev[k + 1])
                tm = t + 0.5 * h
                k1 = d[j, k]
                k2 = f(tm, yk + 0.5 * h * k1, zm)
                k3 = f(tm, yk + 0.5 * h * k2, zm)
                k4 = f(t1, yk + h * k3, zr)
                v = yk + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                d[j, k + 1] = f(t1, v, zr)
            if not math.isfinite(v):
                raise DivergenceError(j, k + 1)
            y[j, k + 1] = v
    return _finish(problem, grid, y, method, last_k, (-1, -1))


def _model_arrays(problem, grid, J, mid=False):
    rhs = problem.rhs
    times = grid.times(J)
    if mid:
        times = times[:, :-1] + 0.5 * grid.h
    return rhs.arrays(times)


# ---------------------------------------------------------------------------
# public solvers


def explicit_euler(problem: DdeProblem, N: int) -> SolutionPath:
    """Explicit Euler with delayed values read from the previous interval."""
    grid, J, last_k = _layout(problem, N)
    if not isinstance(problem.rhs, ModelRhs):
        return _generic(problem, N, "explicit-euler")
    A, B, C = _model_arrays(problem, grid, J)
    y, status = _euler_kernel(A, B, C, float(problem.rhs.a8), float(problem.y0),
                              float(problem.history), J, N, last_k, grid.h)
    return _finish(problem, grid, y, "explicit-euler", last_k, status)


def backward_euler(problem: DdeProblem, N: int, newton_tol: float = 1e-12, max_iter: int = 50) -> SolutionPath:
    """Backward Euler; each step solves ``y = y_k + h f(t_{k+1}, y, z_{k+1})``.

    Steps are closed-form for the linear model fields (a8 in {0, 1}) and a
    safeguarded Newton iteration with numerical slope and bisection fallback
    otherwise. The residual test is relative: ``|G(y)| <= newton_tol *
    max(1, |y_k|)``.
    """
    grid, J, last_k = _layout(problem, N)
    if not isinstance(problem.rhs, ModelRhs):
        return _generic(problem, N, "backward-euler", tol=newton_tol, max_iter=max_iter)
    A, B, C = _model_arrays(problem, grid, J)
    y, status, fail = _beuler_kernel(A, B, C, float(problem.rhs.a8), float(problem.y0),
                                     float(problem.history), J, N, last_k, grid.h,
                                     newton_tol, max_iter)
    if status[0] >= 0 and math.isfinite(fail[0]):
        raise SolverError(f"implicit step failed at interval {status[0]}, step {status[1]}", float(fail[0]))
    return _finish(problem, grid, y, "backward-euler", last_k, status)


def rk4(problem: DdeProblem, N: int, history_interp: str = "hermite") -> SolutionPath:
    """Classical RK4; half-step delayed values from the previous interval.

    ``history_interp`` is ``"hermite"`` (cubic, from stored values and
    slopes) or ``"linear"``.
    """
    if history_interp not in ("hermite", "linear"):
        raise DomainError("history_interp must be 'hermite' or 'linear'")
    hermite = history_interp == "hermite"
    grid, J, last_k = _layout(problem, N)
    if not isinstance(problem.rhs, ModelRhs):
        return _generic(problem, N, "rk4", hermite=hermite)
    A, B, C = _model_arrays(problem, grid, J)
    Am, Bm, Cm = _model_arrays(problem, grid, J, mid=True)
    y, _, status = _rk4_kernel(A, B, C, Am, Bm, Cm, float(problem.rhs.a8), float(problem.y0),
                               float(problem.history), J, N, last_k, grid.h, hermite)
    return _finish(problem, grid, y, "rk4", last_k, status)


def solve(problem: DdeProblem, method: str, N: int, **kwargs) -> SolutionPath:
    method = canonical_method(method)
    if method == "explicit-euler":
        return explicit_euler(problem, N)
    if method == "backward-euler":
        return backward_euler(problem, N, **kwargs)
    return rk4(problem, N, **kwargs)


def constant_problem(model: ConstantModel, n_intervals: int = 10, t_cr: float | None = None) -> DdeProblem:
    """Delay problem for the constant-coefficient model."""
    if t_cr is None:
        t_cr = t_cr_constant(model)
    rhs = ModelRhs((model.A1, model.A2, model.A3), model.a8)
    return DdeProblem(rhs, t_cr, model.rho0, n_intervals, eta=0.0)


def solve_constant(model: ConstantModel, method: str, N: int, n_intervals: int = 10,
                   t_cr: float | None = None, **kwargs) -> SolutionPath:
    return solve(constant_problem(model, n_intervals, t_cr), method, N, **kwargs)


# ---------------------------------------------------------------------------
# full model with time-dependent coefficients


class Crossing(NamedTuple):
    t: float
    rho: float


def detect_t_cr(
    track: CoefficientTrack,
    rho0: float,
    horizon: float | None = None,
    step: float | None = None,
    rho_cr_fn: Callable | None = None,
) -> Crossing | None:
    """First crossing of ``rho_cr(t)`` by the pre-recrystallization solution.

    Integrates ``rho' = A(t) - B(t) rho`` with RK4 at fixed ``step``, watches
    ``g = rho - rho_cr`` at the nodes and, on the first sign change, bisects
    on the cubic Hermite dense output to a relative time tolerance of 1e-10.
    Returns ``None`` if the horizon is exhausted without a crossing.
    """
    if rho_cr_fn is None:
        rho_cr_fn = track.rho_cr
    if horizon is None:
        horizon = track.t_last
    if not horizon > 0:
        raise DomainError("a positive horizon is needed to search for t_cr")
    if step is None:
        b_max = max(track.bounds["A2"][1] * max(track.bounds["eps_dot"][1], 1.0), 1e-300)
        step = min(horizon / 2000.0, 0.01 / b_max)
    n = max(1, int(math.ceil(horizon / step - 1e-9)))
    h = horizon / n
    ts = np.linspace(0.0, horizon, n + 1)
    A, B, _ = (np.broadcast_to(c, ts.shape) for c in track.field(ts))
    Am, Bm, _ = (np.broadcast_to(c, ts[:-1].shape) for c in track.field(ts[:-1] + 0.5 * h))
    rc = np.broadcast_to(np.asarray(rho_cr_fn(ts), dtype=float), ts.shape)

    y = float(rho0)
    if y - rc[0] >= 0:
        return Crossing(0.0, y)
    dy = A[0] - B[0] * y
    for k in range(n):
        k1 = dy
        k2 = Am[k] - Bm[k] * (y + 0.5 * h * k1)
        k3 = Am[k] - Bm[k] * (y + 0.5 * h * k2)
        k4 = A[k + 1] - B[k + 1] * (y + h * k3)
        y1 = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        dy1 = A[k + 1] - B[k + 1] * y1
        if y1 - rc[k + 1] >= 0:
            t0 = ts[k]

            def dense(t):
                th = (t - t0) / h
                th2, th3 = th * th, th * th * th
                return ((2 * th3 - 3 * th2 + 1) * y + (th3 - 2 * th2 + th) * h * dy
                        + (-2 * th3 + 3 * th2) * y1 + (th3 - th2) * h * dy1)

            lo, hi = t0, ts[k + 1]
            while hi - lo > 1e-10 * hi:
                mid = 0.5 * (lo + hi)
                if dense(mid) - float(np.asarray(rho_cr_fn(mid))) >= 0:
                    hi = mid
                else:
                    lo = mid
            t_hit = 0.5 * (lo + hi)
            return Crossing(t_hit, float(dense(t_hit)))
        y, dy = y1, dy1
    return None


def track_rhs(track: CoefficientTrack, a8: float | None = None) -> ModelRhs:
    a8 = track.a8 if a8 is None else a8
    if track.provenance == "constant":
        return ModelRhs(tuple(float(np.asarray(c)) for c in track.field(0.0)), a8)
    return ModelRhs(track.field, a8)


def solve_full_model(
    track: CoefficientTrack,
    rho0: float,
    horizon: float,
    method: str = "rk4",
    N: int = 1000,
    t_cr: float | None = None,
    a8: float | None = None,
    step: float | None = None,
    detect: bool = True,
) -> SolutionPath:
    """Solve the dislocation-density DDE along a coefficient track.

    ``N`` is the number of steps per delay interval. Without a supplied
    ``t_cr`` the critical time is detected first; if the density never
    reaches the critical value, the delay-free equation is integrated over
    the horizon with ``N`` steps and the returned path has
    ``recrystallized=False``. ``detect=False`` skips the search and takes
    that branch directly when no ``t_cr`` is given.
    """
    rhs = track_rhs(track, a8)
    if t_cr is None and detect:
        hit = detect_t_cr(track, rho0, horizon, step)
        t_cr = None if hit is None else hit.t
    if t_cr is None or t_cr <= 0:
        if t_cr is not None and t_cr <= 0:
            raise DomainError("rho0 already exceeds the critical density; no delay interval")
        problem = DdeProblem(rhs, horizon, rho0, 1, eta=0.0)
        path = solve(problem, method, N)
        return SolutionPath(path.grid, path.values, path.method, path.last_k,
                            path.went_negative, path.exceeded_bound, recrystallized=False)
    n = max(1, int(math.ceil(horizon / t_cr - 1e-12)))
    horizon_arg = None if abs(n * t_cr - horizon) <= 1e-12 * horizon else horizon
    problem = DdeProblem(rhs, t_cr, rho0, n, eta=0.0, horizon=horizon_arg)
    return solve(problem, method, N)
