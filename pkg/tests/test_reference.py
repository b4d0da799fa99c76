import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weylbox.errors import LambdaOutOfRange, NonpositiveField
from weylbox.fieldlab import GridBox, ScalarFieldSample, sample_scalar
from weylbox.magop import OperatorSpec, TorusSpec, assemble, constant_field_spec, spin_blocks, torus_grid
from weylbox.reference import (
    WellSpec,
    combined_equation,
    dirichlet_levels,
    landau_pauli_levels,
    lemma51_window,
    prop5_bound,
    separable_count_from_counter,
    separable_spectrum,
    square_well_bound,
    square_well_spectrum,
    torus_flux,
)
from weylbox.speccount import count_below, eigen_dense


def test_landau_examples():
    lad = landau_pauli_levels(5.0, 1.0, 0.1, 3)
    np.testing.assert_allclose(lad.favored, [0, 1, 2, 3])
    np.testing.assert_allclose(lad.other, [1, 2, 3, 4])
    a = landau_pauli_levels(5.0, 10.0, 0.01, 3)
    np.testing.assert_allclose(a.favored, lad.favored)
    assert landau_pauli_levels(2 * np.pi, 1.0, 1.0, 0).degeneracy_density == pytest.approx(1.0)
    with pytest.raises(NonpositiveField):
        landau_pauli_levels(0.0, 1.0, 1.0, 2)


def test_landau_ladder_on_large_box():
    mu, hbar, B0, L, n = 1.0, 0.1, 5.0, 4.0, 121
    g = GridBox((0, 0, 0), (L, L, 0), (n, n, 1))
    spec = constant_field_spec("pauli", hbar, g, mu, [0, 0, B0])
    favored = spin_blocks(assemble(spec))[0]
    lad = landau_pauli_levels(B0, mu, hbar, 2)
    per_level = lad.degeneracy_density * L * L
    step = lad.spacing
    c0 = count_below(favored, 0.5 * step).count
    c1 = count_below(favored, 1.5 * step).count - c0
    assert abs(c0 - per_level) <= 0.1 * per_level
    assert abs(c1 - per_level) <= 0.1 * per_level


def test_torus_flux_examples():
    g = torus_grid(1.0, 1.0, 16, 16)
    assert torus_flux(ScalarFieldSample(g, 2 * np.pi), 1, 1, 1, 1) == pytest.approx((1.0, 1, 0.0))
    assert torus_flux(ScalarFieldSample(g, 0.0), 1, 1, 1, 1)[1] == 0
    B = sample_scalar(g, lambda x, y, z: 2 * np.pi * (3 + np.cos(2 * np.pi * x)))
    phi, N, defect = torus_flux(B, 1, 1, 1, 1)
    assert phi == pytest.approx(3.0, abs=1e-12) and N == 3 and defect < 1e-12


def test_lemma51_examples():
    c, hw, ok = lemma51_window(-1.0, 5, 1.0, 0.1, 10.0, 1.0)
    assert c == pytest.approx(50 / np.pi) and hw == 5.0 and ok
    assert lemma51_window(0.5, 5, 1.0, 0.1, 1.0, 1.0)[0] == 0.0
    assert lemma51_window(-1.0, 0, 1.0, 0.1, 1.0, 1.0)[:2] == (0.0, 0.0)
    assert not lemma51_window(-1.0, 5, 1.0, 0.1, 1.0, 1.0)[2]


def periodic_levels(T3, hbar, tau):
    m_max = int(np.ceil(np.sqrt(max(tau, 0.0)) * T3 / (2 * np.pi * hbar))) + 1
    m = np.arange(-m_max, m_max + 1)
    eps = (2 * np.pi * m * hbar / T3) ** 2
    return np.sort(eps[eps < tau])


@pytest.mark.parametrize("N, T", [(2, 0.45), (5, 0.7)])
def test_lemma51_window_holds_on_torus(N, T):
    # 2 mu hbar B0 = 4 pi hbar^2 N / T^2 must exceed W_- = 1
    hbar, mu, W = 0.1, 1.0, -1.0
    spec = OperatorSpec("torus-pauli", hbar, torus_grid(T, T, 32, 32), mu,
                        potential=ScalarFieldSample(torus_grid(T, T, 32, 32), W), torus=TorusSpec(T, T, N))
    H = assemble(spec)
    B0 = spec.torus.B0(mu, hbar)
    center, hw, ok = lemma51_window(W, N, 1.0, hbar, B0, mu)
    assert ok
    ev = eigen_dense(H)
    res = separable_spectrum(ev[ev < 0], 1.0, hbar, 0.0, levels1d=periodic_levels(1.0, hbar, -W + 1))
    assert center - hw <= res.count <= center + hw


def test_square_well_textbook_case():
    res = square_well_spectrum(WellSpec(10.0, 1.0, 1.0))
    assert res.bound == 2
    assert res.count <= res.bound + 1
    assert np.all(np.abs(res.textbook_residuals) < 1e-10)
    assert np.all(res.orders >= 1.8)
    assert res.report["factor2_matches_oracle"]
    assert res.report["confirmed_count"] == res.count
    assert set(res.report) >= {"factor4_matches_oracle", "count_minus_bound", "bound"}


def test_square_well_combined_equation_residuals():
    spec = WellSpec(10.0, 1.0, 1.0)
    res = square_well_spectrum(spec)
    for f in (2.0, 4.0):
        for lam, r in zip(res.combined_roots[f], res.combined_residuals[f]):
            assert abs(r) < 1e-10
            assert 0 < lam < spec.c
            assert abs(combined_equation(lam, spec, f)) < 1e-8 * spec.c


def test_square_well_bound_small_c():
    assert square_well_bound(WellSpec(1e-9, 1.0, 1.0)) == 0
    res = square_well_spectrum(WellSpec(1e-4, 1.0, 1.0), cells_per_R=50)
    assert res.bound == 0 and res.count <= 1


def test_separable_examples():
    res = separable_spectrum([0, 2, 4], np.pi, 1.0, 5.0)
    assert res.count == 3
    np.testing.assert_allclose(res.levels, [1, 3, 4])
    assert separable_spectrum([0, 2, 4], np.pi, 1.0, 1.0).count == 0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=10), st.floats(0.5, 3), st.floats(-2, 8))
def test_separable_count_is_sum_over_m(levels, R, tau):
    lv = np.sort(levels)
    res = separable_spectrum(lv, R, 0.5, tau)
    eps = dirichlet_levels(R, 0.5, tau - lv[0] + 1)
    assert res.count == sum(int(np.sum(lv < tau - e)) for e in eps)
    assert res.count == separable_count_from_counter(lambda t: int(np.sum(lv < t)), eps, tau)


def test_separable_matches_product_operator():
    hbar, mu, B, W = 0.25, 1.0, 4.0, -2.0
    g2 = GridBox((0, 0, 0), (1, 1, 0), (13, 13, 1))
    g3 = GridBox((0, 0, 0), (1, 1, 1), (13, 13, 13))
    ev2 = eigen_dense(assemble(constant_field_spec("pauli", hbar, g2, mu, [0, 0, B], W)))
    h = 1 / 12
    m = np.arange(1, 12)
    eps = 2 * hbar**2 / h**2 * (1 - np.cos(m * np.pi / 12))
    sep = separable_spectrum(ev2, 1.0, hbar, 0.0, levels1d=eps).count
    full = count_below(assemble(constant_field_spec("pauli", hbar, g3, mu, [0, 0, B], W)), 0.0).count
    assert sep == full


def test_prop5_examples():
    assert prop5_bound(1.0, 1.0, 1.0, 0.0, 1.0, lam=np.exp(-1)) == pytest.approx(1.0)
    a = prop5_bound(1.0, 1.0, 1.0, 1.0, 1.0, lam=0.5)
    b = prop5_bound(1.0, 1.0, 1.0, 2.0, 1.0, lam=0.5)
    assert b / a == pytest.approx(1.5)
    assert prop5_bound(1.0, 1.0, 1.0, 0.0, 1.0, lam=1 - 1e-12) < 1e-11
    with pytest.raises(LambdaOutOfRange):
        prop5_bound(1.0, 1.0, 1.0, 0.0, 1.0, lam=1.0)
    assert prop5_bound(np.e, 1.0, 1.0, 0.0, 1.0, gamma=0.5) == pytest.approx(np.e * 2)
