import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weylbox.effectivefield import (
    BoxIntegrator,
    EffectiveFieldParams,
    box_functional,
    effective_field,
    effective_length,
    effective_length_map,
    shen_bound,
)
from weylbox.errors import InvalidExponent, NonpositiveLambda
from weylbox.fieldlab import GridBox, sample_scalar, sample_vector

G3 = GridBox.cube(5.0, 21, origin=-2.0)
G2 = GridBox((-2.0, -2.0, 0.0), (3.0, 3.0, 0.0), (41, 41, 1))


def test_invalid_exponents():
    with pytest.raises(InvalidExponent):
        EffectiveFieldParams(p=1.5, dim=3)
    with pytest.raises(InvalidExponent):
        EffectiveFieldParams(p=1.0, dim=2)
    EffectiveFieldParams(p=1.2, dim=2)


@pytest.mark.parametrize("p", [2.0, 3.0])
@pytest.mark.parametrize("grid, dim", [(G3, 3), (G2, 2), (G3, 2)])
def test_constant_field(p, grid, dim):
    B = sample_vector(grid, [0, 0, 4.0])
    params = EffectiveFieldParams(p=p, dim=dim)
    assert effective_length(B, (0.5, 0.5, 0.5 if grid is G3 else 0.0), params) == pytest.approx(0.5, abs=1e-9)
    assert effective_field(B, (0.5, 0.5, 0.5 if grid is G3 else 0.0), params) == pytest.approx(4.0, rel=1e-8)


def test_zero_field_is_capped():
    B = sample_vector(G3, [0, 0, 0])
    params = EffectiveFieldParams(l_max=3.0)
    res = effective_length_map(B, params, np.array([[0.5, 0.5, 0.5]]))
    assert res.capped[0]
    assert res.field[0] == pytest.approx(3.0**-2)


def test_scaling_constant_field():
    params = EffectiveFieldParams()
    x = (0.5, 0.5, 0.5)
    b1 = effective_field(sample_vector(G3, [0, 0, 1.5]), x, params)
    b4 = effective_field(sample_vector(G3, [0, 0, 6.0]), x, params)
    assert b4 == pytest.approx(4 * b1, rel=1e-8)


def test_ball_field_root_bracket():
    g = GridBox.cube(6.0, 61, origin=-3.0)
    B = sample_scalar(g, lambda x, y, z: (x**2 + y**2 + z**2 <= 1.0).astype(float))
    params = EffectiveFieldParams(p=2.0, tol=1e-10)
    l = effective_length(B, (0, 0, 0), params)
    assert box_functional(B, (0, 0, 0), l, params) <= 1.0
    assert box_functional(B, (0, 0, 0), l + 1e-8, params) > 1.0


def test_translation_invariance():
    B = sample_vector(G3, [0, 0, 2.0])
    params = EffectiveFieldParams()
    a = effective_length(B, (0.0, 0.0, 0.0), params)
    b = effective_length(B, (1.0, 0.5, 0.2), params)
    assert a == pytest.approx(b, abs=1e-9)


def test_box_integrator_exact_on_constants_and_linear_interpolant():
    g = GridBox.cube(1.0, 11)
    integ = BoxIntegrator(np.full(g.shape, 2.0), g, (0, 1, 2))
    lo = np.array([[0.13, 0.21, 0.05]])
    hi = np.array([[0.77, 0.9, 0.4]])
    assert integ.box(lo, hi)[0] == pytest.approx(2.0 * 0.64 * 0.69 * 0.35, rel=1e-12)
    # fully outside the grid: zero extension
    assert integ.box(lo + 5, hi + 5)[0] == 0.0


def test_shen_examples():
    g = GridBox.cube(5.0, 11, origin=-2.0)
    unit = GridBox.cube(1.0, 3)
    W = sample_scalar(g, -1.0)
    B = sample_vector(g, [0, 0, 1.0])
    params = EffectiveFieldParams()
    assert shen_bound(W, B, 1.0, 1.0, 1.0, params, "trace", region=unit) == pytest.approx(2.0, rel=1e-8)
    assert shen_bound(sample_scalar(g, 0.5), B, 1.0, 1.0, 1.0, params, "trace") == 0.0
    c1 = shen_bound(W, B, 1.0, 1.0, 1.0, params, "count", region=unit)
    c2 = shen_bound(W, B, 1.0, 1.0, 0.5, params, "count", region=unit)
    assert c2 / c1 == pytest.approx(np.sqrt(2.0), rel=1e-14)
    with pytest.raises(NonpositiveLambda):
        shen_bound(W, B, 1.0, 1.0, 0.0, params)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(1.0, 3.0), st.floats(0.0, 2.0))
def test_shen_monotone(lam, factor, extra):
    g = GridBox.cube(1.0, 5)
    B = sample_vector(g, [0, 0, 2.0])
    b_eff = np.full(g.shape, 2.0)
    W = sample_scalar(g, lambda x, y, z: -1.0 + x)
    W2 = sample_scalar(g, lambda x, y, z: -1.0 + x - extra)
    params = EffectiveFieldParams()
    for kind in ("trace", "count"):
        base = shen_bound(W, B, 1.0, 0.5, lam, params, kind, b_eff=b_eff)
        assert shen_bound(W, B, 1.0, 0.5, lam * factor, params, kind, b_eff=b_eff) <= base
        assert shen_bound(W2, B, 1.0, 0.5, lam, params, kind, b_eff=b_eff) >= base
    t1 = shen_bound(W, B, 1.0, 0.5, lam, params, "trace", b_eff=b_eff)
    t2 = shen_bound(W, B, 1.0, 0.5, lam * factor, params, "trace", b_eff=b_eff)
    assert t1 / t2 == pytest.approx(factor, rel=1e-12)
