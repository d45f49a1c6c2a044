"""Worst-case errors, empirical orders and stability classification for the
benchmark cases of the constant-coefficient model."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .analytic import AnalyticSolution, ConstantModel, t_cr_constant
from .errors import DomainError
from .integrators import METHODS, SolutionPath, canonical_method, solve_constant
from .quadrature import QuadratureConfig

DEFAULT_LADDER = (10, 100, 1_000, 10_000, 100_000)
# RK4 reaches roundoff near N = 1e3 on the benchmark cases
RK4_LADDER = (10, 100, 1_000)
ORACLE_N = 1_000_000
ROUNDOFF_FLOOR = 1e-12


@dataclass(frozen=True)
class TestCase:
    """A benchmark parameter set on ``[0, n_intervals * t_cr]``.

    ``reference`` is ``"analytic"`` when the quadrature reference covers the
    whole horizon and ``"mixed"`` when it covers only ``analytic_window``
    delay intervals, the rest being compared with the explicit Euler oracle.
    """

    __test__ = False  # not a pytest class

    label: str
    model: ConstantModel
    n_intervals: int = 10
    reference: str = "analytic"
    analytic_window: int | None = None

    @property
    def t_cr(self) -> float:
        return t_cr_constant(self.model)


def _case(label, a8, rho_cr, A1, A2, A3):
    model = ConstantModel(A1, A2, A3, a8=a8, rho0=0.0, rho_cr=rho_cr)
    if a8 == 1:
        return TestCase(label, model, 10, "mixed", 2)
    return TestCase(label, model)


CASES = {
    "i": _case("i", 0, 1.0, 10.0, 1.0, 0.9),
    "ii": _case("ii", 0, 4.0, 10.0, 2.0, 1.0),
    "iii": _case("iii", 0, 9.0, 10.0, 1.0, 0.9),
    "iv": _case("iv", 0, 9.0, 10.0, 1.0, 1.5),
    "v": _case("v", 0, 4.0, 10.0, 1.0, 5.0),
    "vi": _case("vi", 1, 4.0, 10.0, 2.0, 1.0),
    "vii": _case("vii", 1, 9.0, 10.0, 1.0, 0.9),
}


def get_case(label: str) -> TestCase:
    try:
        return CASES[label.strip().lower()]
    except KeyError:
        raise DomainError(f"unknown case {label!r}; choose from {list(CASES)}") from None


# ---------------------------------------------------------------------------
# metrics


def worst_case_error(path: SolutionPath, reference: Callable, t_max: float | None = None,
                     t_min: float | None = None) -> float:
    """``max |y_k^j - reference(t_k^j)|`` over the grid nodes in ``[t_min, t_max]``."""
    t, y = path.flat()
    keep = np.ones(t.shape, dtype=bool)
    slack = 1e-12 * max(1.0, float(t[-1]))
    if t_max is not None:
        keep &= t <= t_max + slack
    if t_min is not None:
        keep &= t >= t_min - slack
    t, y = t[keep], y[keep]
    if t.size == 0:
        return 0.0
    try:
        ref = np.asarray(reference(t), dtype=float)
    except Exception as exc:
        bad = _first_failure(reference, t)
        j, k = divmod(int(round(bad / path.grid.h)), path.grid.N)
        raise DomainError(f"reference failed at node j={j}, k={k} (t={bad!r}): {exc}") from exc
    diff = np.abs(y - ref)
    if np.any(np.isnan(diff)):
        bad = float(t[np.flatnonzero(np.isnan(diff))[0]])
        raise DomainError(f"reference or path is NaN at t={bad!r}")
    return float(diff.max())


def _first_failure(reference, t):
    for ti in t:
        try:
            reference(np.array([ti]))
        except Exception:
            return float(ti)
    return float(t[0])


def empirical_order(errors: Sequence[tuple[int, float]]) -> list[float | None]:
    """Pairwise slopes ``log(e_i / e_{i+1}) / log(N_{i+1} / N_i)``.

    Pairs with a zero (or negative) error give ``None``.
    """
    if len(errors) < 2:
        raise DomainError("need at least two (N, error) entries")
    Ns = [n for n, _ in errors]
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise DomainError("N must be strictly increasing")
    out = []
    for (n1, e1), (n2, e2) in zip(errors, errors[1:]):
        if e1 > 0 and e2 > 0:
            out.append(math.log(e1 / e2) / math.log(n2 / n1))
        else:
            out.append(None)
    return out


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class ErrorRow:
    method: str
    N: int
    error: float
    order: float | None
    tail_error: float | None = None


@dataclass
class ErrorReport:
    case: str
    rows: list[ErrorRow] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def methods(self) -> list[str]:
        seen = []
        for r in self.rows:
            if r.method not in seen:
                seen.append(r.method)
        return seen

    def series(self, method: str) -> list[tuple[int, float]]:
        method = canonical_method(method)
        return [(r.N, r.error) for r in self.rows if r.method == method]

    def orders(self, method: str) -> list[float | None]:
        method = canonical_method(method)
        return [r.order for r in self.rows if r.method == method][1:]

    def final_order(self, method: str, floor: float = ROUNDOFF_FLOOR) -> float | None:
        """Order over the last adjacent pair whose errors both exceed ``floor``."""
        s = [(n, e) for n, e in self.series(method) if e > floor]
        if len(s) < 2:
            return None
        return empirical_order(s[-2:])[0]

    def final_ratio(self, method: str, floor: float = ROUNDOFF_FLOOR) -> float | None:
        s = [(n, e) for n, e in self.series(method) if e > floor]
        if len(s) < 2:
            return None
        return s[-2][1] / s[-1][1]

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["case", "method", "N", "error", "order"])
            for r in self.rows:
                w.writerow([self.case, r.method, r.N, f"{r.error:.17g}",
                            "" if r.order is None else f"{r.order:.17g}"])

    def text_table(self) -> str:
        """Methods as rows, N as columns, in the usual error-table layout."""
        Ns = sorted({r.N for r in self.rows})
        head = ["method"] + [f"N={n}" for n in Ns] + ["final order"]
        body = []
        for m in self.methods():
            errs = dict(self.series(m))
            fo = self.final_order(m)
            body.append([m] + [f"{errs[n]:.8e}" if n in errs else "-" for n in Ns]
                        + ["-" if fo is None else f"{fo:.3f}"])
            tails = {r.N: r.tail_error for r in self.rows
                     if r.method == m and r.tail_error is not None}
            if tails:
                body.append([f"  {m} (oracle tail)"]
                            + [f"{tails[n]:.8e}" if n in tails else "-" for n in Ns] + ["-"])
        widths = [max(len(row[i]) for row in [head] + body) for i in range(len(head))]
        fmt = lambda row: "  ".join(c.ljust(w) if i == 0 else c.rjust(w)
                                    for i, (c, w) in enumerate(zip(row, widths)))
        lines = [f"case ({self.case})", fmt(head), "-" * (sum(widths) + 2 * (len(widths) - 1))]
        lines += [fmt(r) for r in body]
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# references


@lru_cache(maxsize=16)
def analytic_reference(model: ConstantModel, q_cfg: QuadratureConfig = QuadratureConfig()) -> AnalyticSolution:
    return AnalyticSolution.from_model(model, q_cfg)


@lru_cache(maxsize=8)
def euler_oracle(model: ConstantModel, n_intervals: int = 10, N: int = ORACLE_N) -> SolutionPath:
    """High-resolution explicit Euler path used where no analytic reference exists."""
    return solve_constant(model, "explicit-euler", N, n_intervals)


def path_reference(oracle: SolutionPath) -> Callable:
    """Look up an oracle path at times that are nodes of its grid."""
    t, y = oracle.flat()
    h = oracle.grid.h

    def ref(ts):
        idx = np.rint(np.asarray(ts, dtype=float) / h).astype(np.int64)
        if np.any(idx < 0) or np.any(idx >= y.size):
            raise DomainError("time outside the oracle horizon")
        if np.any(np.abs(t[idx] - ts) > 1e-9 * h + 1e-12 * np.abs(ts)):
            raise DomainError("time is not a node of the oracle grid")
        return y[idx]

    return ref


def case_error(case: TestCase, path: SolutionPath, q_cfg: QuadratureConfig = QuadratureConfig(),
               oracle_N: int = ORACLE_N) -> tuple[float, float | None]:
    """Worst-case errors of ``path`` against the case's references.

    Returns ``(error, tail_error)``. ``error`` is measured against the
    quadrature reference (the whole horizon, or the analytic window for
    mixed cases). ``tail_error`` is the error past the window against the
    explicit Euler oracle, or ``None`` when there is no tail.
    """
    ref = analytic_reference(case.model, q_cfg)
    if case.reference == "analytic":
        return worst_case_error(path, ref), None
    t_win = case.analytic_window * case.t_cr
    e = worst_case_error(path, ref, t_max=t_win)
    tail_e = None
    if path.n_intervals > case.analytic_window:
        oracle = euler_oracle(case.model, case.n_intervals, oracle_N)
        tail_e = worst_case_error(path, path_reference(oracle), t_min=t_win)
    return e, tail_e


def run_case(
    case: TestCase | str,
    methods: Iterable[str] = METHODS,
    ladder: Sequence[int] | None = None,
    q_cfg: QuadratureConfig = QuadratureConfig(),
    oracle_N: int = ORACLE_N,
    window_only: bool = False,
    workers: int = 1,
) -> ErrorReport:
    """Error ladder for each method on one case.

    For mixed-reference cases the reported error is the analytic-window
    error; the oracle comparison past the window is kept in
    ``ErrorRow.tail_error``. The oracle's own O(1/N) error limits how small
    that tail can be, so it is not used for orders.

    ``ladder=None`` uses :data:`DEFAULT_LADDER` for the Euler methods and
    :data:`RK4_LADDER` for RK4. ``window_only`` restricts mixed-reference
    cases to the analytic window (no oracle run needed).
    """
    if isinstance(case, str):
        case = get_case(case)
    methods = [canonical_method(m) for m in methods]
    if not methods:
        raise DomainError("empty method list")
    n_int = case.n_intervals
    if window_only and case.reference == "mixed":
        n_int = case.analytic_window

    jobs = []
    for m in methods:
        Ns = ladder if ladder is not None else (RK4_LADDER if m == "rk4" else DEFAULT_LADDER)
        jobs += [(m, int(n)) for n in Ns]

    def one(job):
        m, n = job
        path = solve_constant(case.model, m, n, n_int)
        return case_error(case, path, q_cfg, oracle_N)

    analytic_reference(case.model, q_cfg)  # build once before fanning out
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            errs = list(pool.map(one, jobs))
    else:
        errs = [one(j) for j in jobs]

    report = ErrorReport(case.label, metadata={
        "abs_tol": q_cfg.abs_tol, "rel_tol": q_cfg.rel_tol, "nodes": q_cfg.nodes,
        "t_cr": case.t_cr, "n_intervals": n_int, "reference": case.reference,
        "oracle_N": oracle_N if case.reference == "mixed" and not window_only else None,
    })
    for m in methods:
        picked = [(n, e) for (mm, n), e in zip(jobs, errs) if mm == m]
        series = [(n, e[0]) for n, e in picked]
        orders = [None] + (empirical_order(series) if len(series) > 1 else [])
        report.rows += [ErrorRow(m, n, e[0], o, e[1]) for (n, e), o in zip(picked, orders)]
    return report


# ---------------------------------------------------------------------------
# stability


STABILITY_LABELS = ("monotone-saturating", "damped-oscillatory", "growing-oscillatory")


@dataclass(frozen=True)
class StabilityResult:
    A3: float
    ratio: float
    label: str
    sign_changes: int
    growth: float | None
    steady: float


def steady_state(model: ConstantModel) -> float:
    """Positive equilibrium of the delayed equation."""
    A1, A2, A3 = model.A1, model.A2, model.A3
    if model.a8 == 0 or A3 == 0:
        return A1 / (A2 + (A3 if model.a8 == 0 else 0.0))
    if model.a8 == 1:
        return (-A2 + math.sqrt(A2 * A2 + 4 * A3 * A1)) / (2 * A3)
    # A1 - A2 r - A3 r^(1+a8) is decreasing on r > 0
    lo, hi = 0.0, A1 / A2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if A1 - A2 * mid - A3 * mid ** (1 + model.a8) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def classify_path(t, y, steady, t_start=0.0, growth_threshold=1.05, last=4):
    """Return ``(label, sign_changes, growth)`` for a sampled path."""
    t, y = np.asarray(t), np.asarray(y)
    d = y[t >= t_start] - steady
    scale = max(abs(steady), float(np.max(np.abs(y))), 1e-300)
    sig = d[np.abs(d) > 1e-9 * scale]
    changes = int(np.count_nonzero(np.diff(np.sign(sig)) != 0)) if sig.size else 0
    if changes < 2:
        return STABILITY_LABELS[0], changes, None
    dd = np.diff(d)
    turn = np.flatnonzero(np.sign(dd[:-1]) * np.sign(dd[1:]) < 0) + 1
    amps = np.abs(d[turn])
    amps = amps[amps > 1e-9 * scale]
    if amps.size < last:
        return STABILITY_LABELS[1], changes, None
    a = amps[-last:]
    growth = float((a[-1] / a[0]) ** (1.0 / (last - 1)))
    label = STABILITY_LABELS[2] if growth > growth_threshold else STABILITY_LABELS[1]
    return label, changes, growth


def stability_scan(
    base: ConstantModel,
    A3_values: Iterable[float],
    N: int = 1000,
    n_intervals: int = 10,
    method: str = "rk4",
) -> list[StabilityResult]:
    """Classify solutions for each ``A3`` by oscillation about the steady state.

    The delay length is the critical time of ``base`` (it does not depend on
    ``A3``). Sign changes of ``rho - rho*`` after ``t_cr`` are counted and the
    amplitude trend over the last four extrema decides damped versus growing.
    """
    t_cr = t_cr_constant(base)
    out = []
    for A3 in A3_values:
        A3 = float(A3)
        if not math.isfinite(A3):
            raise DomainError("A3 values must be finite")
        model = base.replace(A3=A3)
        path = solve_constant(model, method, N, n_intervals, t_cr=t_cr)
        t, y = path.flat()
        steady = steady_state(model)
        label, changes, growth = classify_path(t, y, steady, t_start=t_cr)
        out.append(StabilityResult(A3, A3 / model.A2, label, changes, growth, steady))
    return out
