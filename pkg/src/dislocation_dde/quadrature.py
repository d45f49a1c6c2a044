"""Adaptive Simpson quadrature with Richardson error control.

Two entry points: :func:`adaptive_simpson` for a single integral of a scalar
function, and :func:`cumulative_simpson` which tabulates the running integral
over an equispaced set of panels using a vectorized first pass and falls back
to scalar refinement only on the panels that miss their tolerance share.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AccuracyError, DomainError


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and tabulation density for the reference solutions.

    ``nodes`` is the number of equispaced panels per delay interval on which
    interval solutions are tabulated. ``max_intervals_a8_1`` caps how many
    delay intervals the doubly-integral a8=1 recursion is allowed to build.
    """

    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_depth: int = 50
    nodes: int = 4096
    max_intervals_a8_1: int = 2

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("quadrature tolerances must be positive")
        if self.max_depth < 1 or self.nodes < 2:
            raise DomainError("max_depth must be >= 1 and nodes >= 2")

    def halved(self) -> "QuadratureConfig":
        return QuadratureConfig(
            self.abs_tol / 2, self.rel_tol / 2, self.max_depth, self.nodes,
            self.max_intervals_a8_1,
        )


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float


def _simpson(fa, fm, fb, width):
    return width / 6.0 * (fa + 4.0 * fm + fb)


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    abs_tol: float = 1e-12,
    rel_tol: float = 1e-10,
    max_depth: int = 50,
) -> QuadResult:
    """Integrate ``f`` over ``[a, b]`` by recursive Simpson bisection.

    A panel is accepted when ``|S_left + S_right - S_whole| <= 15 * tol``;
    the accepted value carries the Richardson correction. The tolerance is
    ``max(abs_tol, rel_tol * |S_whole|)`` at the top level and is halved on
    every bisection.

    Raises:
        AccuracyError: some panel hit ``max_depth`` without meeting its share
            of the tolerance. The achieved bound is attached.
    """
    if a == b:
        return QuadResult(0.0, 0.0)
    if a > b:
        r = adaptive_simpson(f, b, a, abs_tol, rel_tol, max_depth)
        return QuadResult(-r.value, r.error)

    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = _simpson(fa, fm, fb, b - a)
    tol = max(abs_tol, rel_tol * abs(whole))
    value, err, ok = _refine(f, a, b, fa, fm, fb, whole, tol, max_depth)
    if not ok:
        raise AccuracyError(
            f"adaptive Simpson on [{a:g}, {b:g}] exceeded depth {max_depth}", err
        )
    return QuadResult(value, err)


def _refine(f, a, b, fa, fm, fb, whole, tol, depth):
    # explicit stack keeps deep refinements away from the recursion limit
    total = 0.0
    err_total = 0.0
    ok = True
    stack = [(a, b, fa, fm, fb, whole, tol, depth)]
    while stack:
        a, b, fa, fm, fb, whole, tol, depth = stack.pop()
        m = 0.5 * (a + b)
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm = f(lm)
        frm = f(rm)
        left = _simpson(fa, flm, fm, m - a)
        right = _simpson(fm, frm, fb, b - m)
        delta = left + right - whole
        if abs(delta) <= 15.0 * tol or depth <= 0 or not (a < lm < m < rm < b):
            if abs(delta) > 15.0 * tol:
                ok = False
            total += left + right + delta / 15.0
            err_total += abs(delta) / 15.0
            continue
        stack.append((m, b, fm, frm, fb, right, tol / 2, depth - 1))
        stack.append((a, m, fa, flm, fm, left, tol / 2, depth - 1))
    return total, err_total, ok


def cumulative_simpson(
    f_vec: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    panels: int,
    abs_tol: float = 1e-12,
    rel_tol: float = 1e-10,
    max_depth: int = 50,
    f_scalar: Callable[[float], float] | None = None,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Running integral of ``f`` at ``panels + 1`` equispaced nodes.

    Each panel receives the share ``abs_tol * width / (b - a)`` of the absolute
    tolerance (and ``rel_tol`` relative to its own magnitude). Panels that
    fail the one-level Richardson test are re-integrated with
    :func:`adaptive_simpson` using ``f_scalar`` (defaults to wrapping
    ``f_vec``).

    Returns:
        ``(nodes, cumulative, error_bound)`` where ``cumulative[0] == 0``.
    """
    nodes = np.linspace(a, b, panels + 1)
    if b == a:
        return nodes, np.zeros_like(nodes), 0.0
    mids = 0.5 * (nodes[:-1] + nodes[1:])
    quarter_l = 0.5 * (nodes[:-1] + mids)
    quarter_r = 0.5 * (mids + nodes[1:])
    f_nodes = np.asarray(f_vec(nodes), dtype=float)
    f_mid = np.asarray(f_vec(mids), dtype=float)
    f_ql = np.asarray(f_vec(quarter_l), dtype=float)
    f_qr = np.asarray(f_vec(quarter_r), dtype=float)

    width = np.diff(nodes)
    whole = width / 6.0 * (f_nodes[:-1] + 4.0 * f_mid + f_nodes[1:])
    left = width / 12.0 * (f_nodes[:-1] + 4.0 * f_ql + f_mid)
    right = width / 12.0 * (f_mid + 4.0 * f_qr + f_nodes[1:])
    delta = left + right - whole
    share = np.maximum(abs_tol * width / (b - a), rel_tol * np.abs(whole))
    pieces = left + right + delta / 15.0
    errors = np.abs(delta) / 15.0

    bad = np.flatnonzero(~(np.abs(delta) <= 15.0 * share))
    if bad.size:
        if f_scalar is None:
            def f_scalar(x):
                return float(f_vec(np.array([x]))[0])
        for i in bad:
            r = adaptive_simpson(
                f_scalar, float(nodes[i]), float(nodes[i + 1]),
                float(share[i]), rel_tol, max_depth,
            )
            pieces[i] = r.value
            errors[i] = r.error

    cumulative = np.concatenate(([0.0], np.cumsum(pieces)))
    if not np.all(np.isfinite(cumulative)):
        raise AccuracyError("non-finite integrand during tabulation", math.inf)
    return nodes, cumulative, float(errors.sum())
