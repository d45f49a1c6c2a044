import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dislocation_dde.coefficients import (
    R_GAS,
    CoefficientTrack,
    MaterialCoefficients,
    coeff_A1,
    coeff_A2,
    coeff_A3,
    flow_stress,
    free_path,
    material_coefficients_at,
    rho_critical,
    track_from_samples,
    zener_hollomon,
)
from dislocation_dde.errors import DomainError, FormatError

temps = st.floats(200.0, 2000.0)
pos = st.floats(1e-3, 1e3)


def test_gas_constant_is_fixed():
    assert R_GAS == 8.314
    assert MaterialCoefficients().R_gas == 8.314


@pytest.mark.parametrize("field", ["a8", "a9"])
@pytest.mark.parametrize("value", [-0.1, 1.5])
def test_exponents_must_lie_in_unit_interval(field, value):
    with pytest.raises(DomainError):
        MaterialCoefficients(**{field: value})


@pytest.mark.parametrize("field", ["b", "mu", "D"])
def test_positive_material_constants(field):
    with pytest.raises(DomainError):
        MaterialCoefficients(**{field: 0.0})


def test_zener_hollomon_examples():
    assert zener_hollomon(1.0, 300.0, 0.0) == 1.0
    assert zener_hollomon(0.0, 1000.0, 3e5) == 0.0
    assert zener_hollomon(1.0, 1.0, 8.314) == pytest.approx(math.e, rel=1e-15)
    with pytest.raises(DomainError):
        zener_hollomon(1.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        zener_hollomon(-1.0, 300.0, 1.0)


def test_free_path_examples():
    assert free_path(0.0, 5.0, 2.0, 0.3) == 0.0
    assert free_path(1.0, 1.0, 2.0, 0.3) == 2.0
    assert free_path(1.0, 16.0, 1.0, 0.5) == 0.25


def test_coeff_A1_examples():
    assert coeff_A1(1.0, 1.0, 1.0) == 1.0
    assert coeff_A1(2.5e-10, 1e-5, 1.0) == pytest.approx(4e14, rel=1e-15)
    assert coeff_A1(1.0, 1.0, 0.0) == 0.0
    with pytest.raises(DomainError):
        coeff_A1(1.0, 0.0, 1.0)


def test_arrhenius_examples():
    assert coeff_A2(7.0, 0.0, 900.0) == 7.0
    assert coeff_A2(1.0, 8.314, 1.0) == pytest.approx(math.exp(-1), rel=1e-15)
    assert coeff_A3(2.0, 0.0, 3.0, 1.0, 1.5, 500.0) == pytest.approx(2.0, rel=1e-15)
    with pytest.raises(DomainError):
        coeff_A3(1.0, 0.0, 1.0, 1.0, 0.0, 500.0)
    with pytest.raises(DomainError):
        coeff_A2(1.0, 1.0, -5.0)


def test_rho_critical_examples():
    assert rho_critical(1.0, 1e4, 0.0, 7.0) == 1e4
    assert rho_critical(1.0, 1e4, 2.0, 3.0) == 10006.0
    assert rho_critical(0.5, 0.0, 1.0, 9.0) == 3.0


def test_flow_stress_examples():
    assert flow_stress(0.0, 1.0, 12.0, 1.0, 1.0) == 12.0
    assert flow_stress(4.0, 0.5, 10.0, 1.0, 2.0) == 12.0
    assert flow_stress(1e14, 1.0, 0.0, 2.5e-10, 45000.0) == pytest.approx(112.5, rel=1e-14)
    with pytest.raises(DomainError):
        flow_stress(-1.0, 1.0, 0.0, 1.0, 1.0)


@given(T=temps, eps=st.floats(0.0, 100.0), Q=st.floats(0.0, 4e5),
       a13=st.floats(0.0, 0.5), a3=st.floats(0.0, 3e5), a5=st.floats(0.0, 3e5),
       rho=st.floats(0.0, 1e16))
def test_all_coefficients_nonnegative(T, eps, Q, a13, a3, a5, rho):
    m = MaterialCoefficients(a1=1e-3, a3=a3, a5=a5, a13=a13, a12=1e3, a10=0.3, Q=Q)
    A1, A2, A3, Z, rc = material_coefficients_at(m, T, eps)
    for v in (A1, A2, A3, Z, rc, flow_stress(rho, 1.0, 0.0, m.b, m.mu)):
        assert v >= 0


@given(T1=temps, T2=temps, a=pos, e=st.floats(1.0, 3e5))
def test_arrhenius_monotone_in_temperature(T1, T2, a, e):
    lo, hi = sorted((T1, T2))
    if hi - lo < 1e-6 * hi:
        return
    assert coeff_A2(a, e, lo) < coeff_A2(a, e, hi)
    assert coeff_A3(a, e, 45000.0, 2.5e-10, 1e-4, lo) < coeff_A3(a, e, 45000.0, 2.5e-10, 1e-4, hi)


@given(rho=st.floats(0.0, 1e16), a6=pos, a7=st.floats(0.0, 100.0))
def test_flow_stress_scales_with_sqrt(rho, a6, a7):
    s1 = flow_stress(rho, a6, a7, 2.5e-10, 45000.0) - a7
    s4 = flow_stress(4 * rho, a6, a7, 2.5e-10, 45000.0) - a7
    assert s4 == pytest.approx(2 * s1, rel=1e-12, abs=1e-9)


@given(c=st.floats(0.0, 1e3), eps=st.floats(0.0, 1e3), T=temps, Q=st.floats(0.0, 4e5))
def test_zener_multiplicative(c, eps, T, Q):
    assert zener_hollomon(c * eps, T, Q) == pytest.approx(c * zener_hollomon(eps, T, Q), rel=1e-12)


# -- tracks ---------------------------------------------------------------

MAT = MaterialCoefficients(a1=2e-3, a2=170.0, a3=2e4, a4=7e6, a5=1.5e5, a8=1.0,
                           a10=0.26, a12=3e8, a13=0.13, Q=3e5)


def test_identical_samples_give_constant_track():
    tr = track_from_samples([(0.0, 900.0, 2.0), (1.0, 900.0, 2.0)], MAT)
    A1, A2, A3, _, _ = material_coefficients_at(MAT, 900.0, 2.0)
    got = tr.state(np.array([0.0, 0.3, 1.0]))
    np.testing.assert_allclose(got[0], A1, rtol=1e-15)
    np.testing.assert_allclose(got[1], A2, rtol=1e-15)
    np.testing.assert_allclose(got[2], A3, rtol=1e-15)


def test_query_at_sample_and_midpoint():
    tr = track_from_samples([(0.0, 1000.0, 1.0), (2.0, 1100.0, 1.0)], MAT)
    assert tr.state(0.0)[0] == material_coefficients_at(MAT, 1000.0, 1.0)[0]
    mid = tr.state(1.0)
    ref = material_coefficients_at(MAT, 1050.0, 1.0)
    for a, b in zip(mid[:3], ref[:3]):
        assert a == pytest.approx(b, rel=1e-14)
    assert mid[4] == 1050.0


def test_track_clamps_outside_domain():
    tr = track_from_samples([(0.0, 1000.0, 1.0), (1.0, 1100.0, 3.0)], MAT)
    assert tr.state(-5.0)[4] == 1000.0
    assert tr.state(7.0)[3] == 3.0


def test_track_records_bounds():
    tr = track_from_samples([(0.0, 1000.0, 1.0), (1.0, 1100.0, 3.0)], MAT)
    lo, hi = tr.bounds["T"]
    assert (lo, hi) == (1000.0, 1100.0)
    assert tr.bounds["A2"][0] <= tr.state(0.5)[1] <= tr.bounds["A2"][1]


@pytest.mark.parametrize("samples", [
    [(0.0, 900.0, 1.0), (0.0, 900.0, 1.0)],
    [(0.0, 900.0, 1.0), (1.0, 900.0, 1.0), (0.5, 900.0, 1.0)],
    [(0.0, 900.0, 1.0)],
])
def test_unsorted_or_short_samples_rejected(samples):
    with pytest.raises(FormatError):
        track_from_samples(samples, MAT)


def test_zero_strain_rate_switches_off_hardening():
    tr = track_from_samples([(0.0, 900.0, 0.0), (1.0, 900.0, 0.0)], MAT)
    A, B, C = tr.field(0.5)
    assert A == 0.0 and B == 0.0 and C > 0


def test_constant_and_tabulated_tracks():
    c = CoefficientTrack.constant(10.0, 2.0, 1.0, rho_cr=4.0)
    assert c.field(3.0) == (10.0, 2.0, 1.0)
    assert c.rho_cr(0.0) == 4.0
    t = CoefficientTrack.tabulated([0, 1], [1, 3], 2.0, 0.5, eps_dot=[1, 1], rho_cr=[5, 7])
    assert t.state(0.5)[0] == 2.0
    assert t.rho_cr(0.25) == 5.5
    with pytest.raises(DomainError):
        CoefficientTrack.tabulated([0, 1], [-1, 3], 2.0, 0.5, eps_dot=1.0)
