import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dislocation_dde.analytic import ConstantModel, t_cr_constant
from dislocation_dde.coefficients import CoefficientTrack
from dislocation_dde.errors import DivergenceError, DomainError, SolverError
from dislocation_dde.integrators import (
    METHODS,
    DdeProblem,
    DelayGrid,
    ModelRhs,
    backward_euler,
    canonical_method,
    constant_problem,
    detect_t_cr,
    explicit_euler,
    rk4,
    solve,
    solve_constant,
    solve_full_model,
)

CASE_II = ConstantModel(10.0, 2.0, 1.0, rho0=0.0, rho_cr=4.0)


def test_method_names():
    assert canonical_method("euler") == "explicit-euler"
    assert canonical_method("RK4") == "rk4"
    with pytest.raises(DomainError):
        canonical_method("leapfrog")


def test_grid_alignment():
    g = DelayGrid(7, 0.3)
    ts = g.times(4)
    # the delayed query of node (j, k) is node (j - 1, k)
    assert np.max(np.abs(ts[1:] - 0.3 - ts[:-1])) < 1e-15
    assert g.h * g.N == pytest.approx(0.3, abs=np.spacing(0.3))
    assert g.node(2, 7) == pytest.approx(g.node(3, 0), abs=1e-15)


@pytest.mark.parametrize("method", METHODS)
@pytest.mark.parametrize("compiled", [True, False])
def test_zero_field_keeps_history(method, compiled):
    rhs = ModelRhs((0.0, 0.0, 0.0), 0.0) if compiled else (lambda t, y, z: 0.0)
    path = solve(DdeProblem(rhs, 1.0, 3.5, 3), method, 8)
    assert np.all(path.values == 3.5)


def test_euler_first_step():
    path = solve_constant(CASE_II, "explicit-euler", 50, n_intervals=1)
    h = path.grid.h
    assert path.values[0, 1] == pytest.approx(10 * h, rel=1e-15)


def test_backward_euler_linear_step():
    rhs = ModelRhs((10.0, 2.0, 0.0), 0.0)
    path = backward_euler(DdeProblem(rhs, 1.0, 0.0, 1), 10)
    assert path.values[0, 1] == pytest.approx(1 / 1.2, rel=1e-14)
    gen = backward_euler(DdeProblem(lambda t, y, z: 10 - 2 * y, 1.0, 0.0, 1), 10)
    assert gen.values[0, 1] == pytest.approx(1 / 1.2, rel=1e-12)


def test_rk4_one_step():
    rhs = ModelRhs((10.0, 2.0, 0.0), 0.0)
    path = rk4(DdeProblem(rhs, 1.0, 0.0, 1), 10)
    exact = 5 * (1 - math.exp(-0.2))
    # one step reproduces the degree-4 Taylor polynomial of exp(-2h)
    taylor = 5 * (1 - sum((-0.2) ** n / math.factorial(n) for n in range(5)))
    assert path.values[0, 1] == pytest.approx(taylor, rel=1e-14)
    assert abs(path.values[0, 1] - exact) < 10 * 0.2**5 / 120


@pytest.mark.parametrize("method", METHODS)
def test_joints_and_finiteness(method):
    path = solve_constant(CASE_II, method, 40)
    assert np.all(path.values[1:, 0] == path.values[:-1, -1])
    assert np.all(np.isfinite(path.values))


@pytest.mark.parametrize("method", METHODS)
@pytest.mark.parametrize("a8", [0.0, 0.45239, 1.0])
def test_compiled_matches_generic(method, a8):
    A, B, C = 10.0, 2.0, 1.0
    m = ModelRhs((A, B, C), a8)
    generic = lambda t, y, z: m(t, y, z)
    t_cr = t_cr_constant(CASE_II)
    p1 = solve(DdeProblem(m, t_cr, 0.0, 4, eta=0.0), method, 30)
    p2 = solve(DdeProblem(generic, t_cr, 0.0, 4, eta=0.0), method, 30)
    np.testing.assert_allclose(p1.values, p2.values, rtol=1e-11, atol=1e-12)


@pytest.mark.parametrize("method", METHODS)
def test_deterministic(method):
    a = solve_constant(CASE_II, method, 123).values
    b = solve_constant(CASE_II, method, 123).values
    assert a.tobytes() == b.tobytes()


def test_linear_history_costs_rk4_two_orders():
    from dislocation_dde.error_harness import analytic_reference, empirical_order, worst_case_error

    ref = analytic_reference(CASE_II)
    problem = constant_problem(CASE_II)
    errs = {hi: [(N, worst_case_error(rk4(problem, N, history_interp=hi), ref)) for N in (100, 1000)]
            for hi in ("hermite", "linear")}
    assert empirical_order(errs["hermite"])[0] > 3.5
    assert 1.8 < empirical_order(errs["linear"])[0] < 2.2
    with pytest.raises(DomainError):
        rk4(problem, 10, history_interp="spline")


def test_euler_delayed_slot_reads_stored_node():
    # y' = z with eta = 0 on the first interval and y0 = 1
    seen = []

    def f(t, y, z):
        seen.append((t, z))
        return z

    path = explicit_euler(DdeProblem(f, 1.0, 1.0, 2, eta=0.0), 4)
    assert np.all(path.values[0] == 1.0)
    second = [z for t, z in seen if t >= 1.0 - 1e-12]
    assert second == [1.0] * 4


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_error_carries_location():
    with pytest.raises(DivergenceError) as exc:
        explicit_euler(DdeProblem(lambda t, y, z: y * y, 1.0, 1e200, 1), 4)
    assert exc.value.j == 0 and exc.value.k >= 1


def test_solver_error_on_nonconvergence():
    with pytest.raises(SolverError) as exc:
        backward_euler(DdeProblem(lambda t, y, z: -math.copysign(abs(y) ** 0.3, y) + math.sin(50 * y),
                                  1.0, 5.0, 1), 2, newton_tol=1e-300, max_iter=2)
    assert exc.value.residual >= 0


@settings(max_examples=40, deadline=None)
@given(A=st.floats(-10, 10), B=st.floats(0, 10), p=st.floats(0.2, 1.0), z=st.floats(-5, 5),
       y=st.floats(-5, 5), d=st.floats(0, 5), h=st.floats(1e-3, 1.0))
def test_backward_euler_preserves_order(A, B, p, z, y, d, h):
    f = lambda t, u, w: A - B * u - math.copysign(abs(u) ** p, u) * abs(w)
    lo = backward_euler(DdeProblem(f, h, y, 1, eta=z), 1).values[0, 1]
    hi = backward_euler(DdeProblem(f, h, y + d, 1, eta=z), 1).values[0, 1]
    assert lo <= hi + 1e-12 * max(1.0, abs(hi))


@settings(max_examples=60, deadline=None)
@given(A=st.floats(0, 10), B=st.floats(0, 10), C=st.floats(0, 5), a8=st.floats(0.05, 0.95),
       z=st.floats(-5, 5), y=st.floats(-5, 5), d=st.floats(0, 5), h=st.floats(1e-3, 1.0))
def test_compiled_backward_euler_preserves_order(A, B, C, a8, z, y, d, h):
    rhs = ModelRhs((A, B, C), a8)
    lo = backward_euler(DdeProblem(rhs, h, y, 1, eta=z), 1).values[0, 1]
    hi = backward_euler(DdeProblem(rhs, h, y + d, 1, eta=z), 1).values[0, 1]
    assert lo <= hi + 1e-12 * max(1.0, abs(hi))


def test_csv_rows_left_closed(tmp_path):
    path = solve_constant(CASE_II, "explicit-euler", 5, n_intervals=3)
    out = tmp_path / "s.csv"
    path.to_csv(out)
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["j", "k", "t", "y"]
    assert len(rows) - 1 == 3 * 5 + 1
    assert rows[-1][:2] == ["2", "5"]
    assert float(rows[-1][3]) == path.values[-1, -1]
    ts, ys = path.flat()
    assert len(ts) == 16 and np.all(np.diff(ts) > 0)


def test_horizon_truncation():
    t_cr = t_cr_constant(CASE_II)
    rhs = ModelRhs((10.0, 2.0, 1.0), 0.0)
    path = explicit_euler(DdeProblem(rhs, t_cr, 0.0, 3, eta=0.0, horizon=2.5 * t_cr), 10)
    assert path.last_k == 5
    assert np.all(np.isnan(path.values[-1, 6:]))
    assert np.all(np.isfinite(path.values[path.valid_mask()]))


def test_flags_for_broken_regime():
    m = ConstantModel(10.0, 1.0, 5.0, rho0=0.0, rho_cr=4.0)
    path = solve_constant(m, "rk4", 200, n_intervals=10)
    assert path.went_negative
    calm = solve_constant(CASE_II, "rk4", 200)
    assert not calm.went_negative and not calm.exceeded_bound


def test_problem_validation():
    with pytest.raises(DomainError):
        DdeProblem(lambda t, y, z: 0.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        DelayGrid(0, 1.0)
    with pytest.raises(DomainError):
        DdeProblem(lambda t, y, z: 0.0, 1.0, 1.0, 2, horizon=3.0)


# -- time-dependent model -------------------------------------------------

def test_detect_t_cr_constant_oracle():
    tr = CoefficientTrack.constant(10.0, 2.0, 1.0, rho_cr=4.0)
    hit = detect_t_cr(tr, 0.0, horizon=5.0)
    assert abs(hit.t - 0.5 * math.log(5)) < 1e-8
    assert hit.rho == pytest.approx(4.0, abs=1e-8)


def test_detect_t_cr_no_crossing_and_immediate():
    tr = CoefficientTrack.constant(10.0, 2.0, 1.0, rho_cr=5.0)
    assert detect_t_cr(tr, 0.0, horizon=50.0) is None
    assert detect_t_cr(tr, 6.0, horizon=1.0).t == 0.0


def test_detect_t_cr_time_change():
    base = CoefficientTrack.tabulated([0, 5], 10.0, 2.0, 1.0, eps_dot=1.0, rho_cr=4.0)
    fast = CoefficientTrack.tabulated([0, 5], 10.0, 2.0, 1.0, eps_dot=2.0, rho_cr=4.0)
    assert detect_t_cr(fast, 0.0).t == pytest.approx(0.5 * detect_t_cr(base, 0.0).t, abs=1e-9)


def test_full_model_without_recrystallization_is_monotone():
    tr = CoefficientTrack.constant(10.0, 2.0, 0.0, rho_cr=7.0)
    path = solve_full_model(tr, 0.0, horizon=6.0, N=600)
    assert not path.recrystallized
    _, ys = path.flat()
    assert np.all(np.diff(ys) >= 0)
    assert ys[-1] == pytest.approx(5.0, rel=1e-4)
    assert not path.went_negative and not path.exceeded_bound


def test_full_model_matches_constant_solver():
    tr = CoefficientTrack.constant(10.0, 2.0, 1.0, rho_cr=4.0)
    t_cr = t_cr_constant(CASE_II)
    path = solve_full_model(tr, 0.0, horizon=4 * t_cr, N=100, t_cr=t_cr)
    ref = solve_constant(CASE_II, "rk4", 100, n_intervals=4)
    np.testing.assert_array_equal(path.values, ref.values)


def test_full_model_rejects_supercritical_start():
    tr = CoefficientTrack.constant(10.0, 2.0, 1.0, rho_cr=4.0)
    with pytest.raises(DomainError):
        solve_full_model(tr, 4.5, horizon=2.0)
