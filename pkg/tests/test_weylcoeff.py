import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from weylbox.errors import GammaZero, NegativeB, NegativeGamma
from weylbox.fieldlab import GridBox, sample_scalar
from weylbox.weylcoeff import (
    WeylParams,
    beta_gamma,
    majorants,
    riesz_integral_identity_check,
    weyl_coefficient,
    weyl_density,
)

UNIT = GridBox.cube(1.0, 5)
BETA0 = 1 / (2 * np.pi**2)


@pytest.mark.parametrize(
    "gamma, expected",
    [(0.0, 1 / (2 * np.pi**2)), (1.0, 1 / (3 * np.pi**2)), (0.5, 1 / (8 * np.pi))],
)
def test_beta_closed_forms(gamma, expected):
    assert beta_gamma(gamma) == pytest.approx(expected, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 20.0))
def test_beta_matches_quadrature(gamma):
    val, _ = integrate.quad(lambda t: t**gamma, 0, 1, weight="alg", wvar=(0.0, -0.5), epsabs=0, epsrel=1e-13)
    assert beta_gamma(gamma) == pytest.approx(val / (4 * np.pi**2), rel=1e-9)


def test_beta_negative():
    with pytest.raises(NegativeGamma):
        beta_gamma(-0.1)
    with pytest.raises(NegativeGamma):
        WeylParams(gamma=-1)


@pytest.mark.parametrize(
    "b, expected",
    [
        (1.0, BETA0),
        (0.0, 1 / (3 * np.pi**2)),
        (0.25, BETA0 * 0.25 * (1 + 2 * np.sqrt(0.5))),
    ],
)
def test_weyl_constant_examples(b, expected):
    res = weyl_coefficient(b, -1.0, WeylParams(), grid=UNIT)
    assert res.value == pytest.approx(expected, rel=1e-12)


def test_weyl_truncation_index():
    res = weyl_coefficient(0.25, -1.0, WeylParams(), grid=UNIT)
    assert res.max_landau_index == 2  # the k = 2 term has base exactly zero
    assert weyl_coefficient(1.0, -1.0, WeylParams(), grid=UNIT).max_landau_index == 0


def test_weyl_zero_when_v_nonnegative():
    g = GridBox.cube(1.0, 7)
    v = sample_scalar(g, lambda x, y, z: x**2)
    assert weyl_coefficient(sample_scalar(g, 1.0), v, WeylParams(1.0)).value == 0.0
    assert weyl_coefficient(1.0, -1.0, WeylParams(lam=1.0), grid=g).value == 0.0


def test_weyl_negative_b():
    with pytest.raises(NegativeB):
        weyl_coefficient(-1.0, -1.0, grid=UNIT)


def test_weyl_lambda_folded_into_v():
    a = weyl_coefficient(0.3, -1.0, WeylParams(0.5, lam=0.4), grid=UNIT).value
    b = weyl_coefficient(0.3, -0.6, WeylParams(0.5), grid=UNIT).value
    assert a == b


def test_weyl_extra_terms_change_nothing():
    b, vm, gamma = 0.07, 1.3, 0.5
    exact, _ = weyl_density(b, -vm, gamma)
    k = np.arange(1, 200)
    terms = np.maximum(vm - 2 * k * b, 0.0) ** (gamma + 0.5)
    brute = beta_gamma(gamma) * b * (vm ** (gamma + 0.5) + 2 * terms.sum())
    assert float(exact) == pytest.approx(brute, rel=1e-13)


def test_weyl_large_landau_index_path():
    # more than the vectorized term count forces the chunked path
    b, vm = 1e-5, 1.0
    dens, kmax = weyl_density(b, -vm, 0.0)
    assert kmax in (49999, 50000)  # the last base is zero up to rounding
    classical = beta_gamma(0.0) * vm**1.5 / 1.5
    assert float(dens) == pytest.approx(classical, rel=1e-4)


def test_classical_limit_gap_decreases():
    base = weyl_coefficient(0.0, -1.0, grid=UNIT).value
    gaps = [abs(weyl_coefficient(d, -1.0, grid=UNIT).value - base) / base for d in (1e-2, 1e-3)]
    assert gaps[1] < gaps[0]
    assert gaps[1] < 1e-3


def test_weyl_region_subcube():
    g = GridBox.cube(2.0, 21)
    sub = GridBox.cube(1.0, 3)
    assert weyl_coefficient(0.0, -1.0, region=sub, grid=g).value == pytest.approx(1 / (3 * np.pi**2), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    st.floats(0.0, 5.0),
    st.floats(-5.0, 1.0),
    st.floats(0.0, 3.0),
    st.floats(0.0, 1.0),
    st.floats(0.0, 1.0),
)
def test_weyl_monotone(b, v, gamma, dl, dv):
    f = lambda vv, lam: weyl_coefficient(b, vv, WeylParams(gamma, lam), grid=UNIT).value  # noqa: E731
    assert f(v, dl) <= f(v, 0.0) * (1 + 1e-12) + 1e-300
    assert f(v - dv, 0.0) >= f(v, 0.0) * (1 - 1e-12)


def test_identity_examples():
    d, i = riesz_integral_identity_check(1.0, -1.0, 1.0, grid=UNIT)
    assert d == pytest.approx(i, rel=1e-2)
    assert riesz_integral_identity_check(1.0, 0.5, 1.0, grid=UNIT) == (0.0, 0.0)
    d, i = riesz_integral_identity_check(0.0, -1.0, 1.0, grid=UNIT)
    expected = beta_gamma(1.0) * 0.4
    assert d == pytest.approx(expected, rel=1e-12)
    assert i == pytest.approx(expected, rel=1e-2)
    with pytest.raises(GammaZero):
        riesz_integral_identity_check(1.0, -1.0, 0.0, grid=UNIT)


@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0, 3.5])
def test_identity_varying_fields(gamma):
    g = GridBox.cube(1.0, 6)
    b = sample_scalar(g, lambda x, y, z: 0.2 + x * y)
    v = sample_scalar(g, lambda x, y, z: -2.0 + z)
    d, i = riesz_integral_identity_check(b, v, gamma)
    assert d == pytest.approx(i, rel=1e-6)


def test_majorant_examples():
    m = majorants(1.0, -4.0, 0.0, grid=UNIT)
    assert m["M12"] == pytest.approx(2.0)
    assert m["N12"] == pytest.approx(8.0)
    m = majorants(1.0, -3.0, -3.0, grid=UNIT)
    assert m["potential_shift_bound"] == 0.0
    assert m["field_shift_bound"] == 0.0
    assert majorants(2.0, -1.0, 0.0, grid=UNIT)["clr"] == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 3))
def test_majorants_nonnegative(b, u1, u2, b2):
    m = majorants(b, u1, u2, grid=UNIT, b2=b2)
    assert all(val >= 0 for val in m.values())
