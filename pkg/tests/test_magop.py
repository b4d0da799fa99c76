import numpy as np
import pytest
import scipy.sparse as sp

from weylbox.errors import GridTooSmall, NonIntegerFlux
from weylbox.fieldlab import GridBox, ScalarFieldSample, sample_scalar, sample_vector
from weylbox.magop import (
    OperatorSpec,
    TorusSpec,
    assemble,
    constant_field_spec,
    export_coo,
    favored_block,
    import_coo,
    spin_blocks,
    torus_grid,
    torus_links,
    torus_spec_from_field,
    with_gauge_change,
)
from weylbox.speccount import count_below, eigen_dense, eigen_window


def grid2d(n, L=1.0):
    return GridBox((0, 0, 0), (L, L, 0), (n, n, 1))


def varying_field_spec(kind="pauli", n=20, mu=1.0, hbar=0.3):
    g = grid2d(n)
    B = sample_vector(g, [0, 0, lambda x, y, z: 3.0 + np.sin(2 * x) * y])
    W = sample_scalar(g, lambda x, y, z: x - y**2)
    return OperatorSpec(kind, hbar, g, mu, B=B, potential=W)


def test_free_laplacian_1d_tridiagonal():
    g = GridBox((0, 0, 0), (1, 0, 0), (6, 1, 1))
    H = assemble(OperatorSpec("schrodinger", 1.0, g)).toarray()
    h2 = 0.2**2
    expected = (np.diag(np.full(4, 2.0)) - np.diag(np.ones(3), 1) - np.diag(np.ones(3), -1)) / h2
    np.testing.assert_allclose(H, expected, atol=1e-12)


def test_1d_box_levels_second_order():
    errs = []
    for n in (101, 201):
        g = GridBox((0, 0, 0), (np.pi, 0, 0), (n, 1, 1))
        ev = eigen_dense(assemble(OperatorSpec("schrodinger", 1.0, g)))
        errs.append(abs(ev[0] - 1.0))
    assert errs[1] < 1e-3
    assert np.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.1)


@pytest.mark.parametrize("kind", ["schrodinger", "pauli", "dirac"])
def test_exactly_hermitian(kind):
    H = assemble(varying_field_spec(kind, n=8))
    assert H.hermitian_defect() == 0.0
    assert np.all(np.isfinite(H.matrix.data))


def test_exactly_hermitian_torus():
    g = torus_grid(1.0, 1.0, 8, 8)
    H = assemble(OperatorSpec("torus-pauli", 0.05, g, 1.0, torus=TorusSpec(1.0, 1.0, 2)))
    assert H.hermitian_defect() == 0.0


def test_gauge_invariance_pauli():
    spec = varying_field_spec(n=24)
    chi = sample_scalar(spec.grid, lambda x, y, z: 5 * np.sin(3 * x + y) + x * y)
    e1 = eigen_dense(assemble(spec))
    e2 = eigen_dense(assemble(with_gauge_change(spec, chi)))
    assert np.max(np.abs(e1 - e2)) <= 1e-10 * np.max(np.abs(e1))


def test_gauge_invariance_sampled_vector_potential():
    g = grid2d(16)
    a = sample_vector(g, [lambda x, y, z: -y * (1 + x), lambda x, y, z: x**2, 0])
    spec = OperatorSpec("schrodinger", 0.2, g, 1.0, a=a)
    chi = sample_scalar(g, lambda x, y, z: np.cos(4 * x * y))
    e1 = eigen_dense(assemble(spec))
    e2 = eigen_dense(assemble(with_gauge_change(spec, chi)))
    np.testing.assert_allclose(e1, e2, rtol=0, atol=1e-10 * np.max(np.abs(e1)))


def test_pauli_constant_b3_blocks_decouple():
    spec = constant_field_spec("pauli", 0.2, grid2d(12), 1.0, [0, 0, 5.0])
    H = assemble(spec)
    n = H.dim // 2
    assert H.matrix[:n, n:].nnz == 0 or abs(H.matrix[:n, n:]).max() == 0
    up, down = spin_blocks(H)
    diff = (up - down).toarray()
    np.testing.assert_allclose(diff, -2 * 0.2 * 5.0 * np.eye(n), atol=1e-12)


def test_pauli_zero_field_doubles_schrodinger():
    g = grid2d(10)
    W = sample_scalar(g, lambda x, y, z: x * y)
    Bz = sample_vector(g, [0, 0, 0])
    es = eigen_dense(assemble(OperatorSpec("schrodinger", 0.5, g, 1.0, B=Bz, potential=W)))
    ep = eigen_dense(assemble(OperatorSpec("pauli", 0.5, g, 1.0, B=Bz, potential=W)))
    np.testing.assert_allclose(ep, np.repeat(es, 2), atol=1e-10)


def test_pauli_lowest_landau_level():
    spec = constant_field_spec("pauli", 0.2, grid2d(81, 2.0), 1.0, [0, 0, 5.0])
    block = spin_blocks(assemble(spec))[favored_block(1)]
    # the Landau gap is 2 mu hbar B = 2
    window = eigen_window(block, 0.0, 1.0)
    assert len(window) > 0
    assert abs(window[0]) < 0.05
    assert count_below(block, window[0] - 1e-9).count == 0


def test_pauli_form_bound():
    spec = varying_field_spec(n=16)
    ep = eigen_dense(assemble(spec))[0]
    es = eigen_dense(assemble(OperatorSpec("schrodinger", spec.hbar, spec.grid, spec.mu, B=spec.B,
                                           potential=spec.potential)))[0]
    bmax = np.max(spec.B.norm().values)
    assert ep >= es - spec.mu * spec.hbar * bmax - 1e-10


def test_pauli_general_field_spin_blocks_coupled():
    g = grid2d(6)
    spec = OperatorSpec("pauli", 0.3, g, 1.0, B=sample_vector(g, [1.0, 0, 2.0]))
    with pytest.raises(ValueError):
        spin_blocks(assemble(spec))


def test_dirac_free_pairing_and_gap():
    g = grid2d(9)
    spec = OperatorSpec("dirac", 0.3, g, 0.0, wilson=0.0)
    ev = eigen_dense(assemble(spec))
    np.testing.assert_allclose(np.sort(ev), np.sort(-ev), atol=1e-12)
    assert np.min(np.abs(ev)) >= 1.0 - 1e-12


def test_dirac_wilson_keeps_gap():
    g = grid2d(9)
    ev = eigen_dense(assemble(OperatorSpec("dirac", 0.3, g, 0.0, wilson=1.0)))
    assert np.min(np.abs(ev)) >= 1.0 - 1e-12


def _dirac_square_defect(n):
    g = grid2d(n, 2.0)
    mu, hbar, V0 = 1.0, 0.5, -0.3
    spec = constant_field_spec("dirac", hbar, g, mu, [0, 0, 2.0], V0, wilson=0.0)
    D = assemble(spec).matrix
    P = assemble(constant_field_spec("pauli", hbar, g, mu, [0, 0, 2.0])).matrix
    m = P.shape[0] // 2
    pts = g.points()[assemble(spec).meta["nodes"]]
    bump = np.exp(-((pts[:, 0] - 1) ** 2 + (pts[:, 1] - 1) ** 2) / 0.08)
    rng = np.random.default_rng(0)
    phi = np.kron(rng.normal(size=4) + 1j * rng.normal(size=4), bump)
    A = D - V0 * sp.identity(4 * m)
    lhs = A @ (A @ phi)
    rhs = sp.kron(sp.identity(2), P) @ phi + phi
    return np.linalg.norm(lhs - rhs) / np.linalg.norm(phi), 2.0 / (n - 1)


def test_dirac_squared_identity_defect_shrinks():
    (e1, h1), (e2, h2) = _dirac_square_defect(41), _dirac_square_defect(81)
    assert e2 < e1
    assert e1 <= 50 * h1 and e2 <= 50 * h2


def test_grid_too_small():
    g = GridBox((0, 0, 0), (1, 1, 0), (3, 3, 1))
    assert assemble(OperatorSpec("schrodinger", 1.0, g)).dim == 1
    point = GridBox((0, 0, 0), (0, 0, 0), (1, 1, 1))
    with pytest.raises(GridTooSmall):
        assemble(OperatorSpec("schrodinger", 1.0, point))


# --- torus ----------------------------------------------------------------


def torus_spec(N, n=32, hbar=0.05, mu=1.0, B_fluct=None):
    g = torus_grid(1.0, 1.0, n, n)
    return OperatorSpec("torus-pauli", hbar, g, mu, torus=TorusSpec(1.0, 1.0, N, B_fluct=B_fluct))


def test_torus_zero_flux_constant_mode():
    g = torus_grid(1.0, 1.0, 8, 8)
    H = assemble(OperatorSpec("torus-pauli", 0.3, g, 1.0, torus=TorusSpec(1.0, 1.0, 0)))
    ev, vec = np.linalg.eigh(H.toarray())
    assert abs(ev[0]) < 1e-12 and abs(ev[1]) < 1e-12 and ev[2] > 1e-3
    v = vec[: g.size, 0] if np.linalg.norm(vec[: g.size, 0]) > 0.5 else vec[g.size:, 0]
    np.testing.assert_allclose(np.abs(v), np.abs(v[0]), atol=1e-10)


@pytest.mark.parametrize("N", [1, 2, 3, 5, -2])
def test_torus_zero_modes(N):
    spec = torus_spec(N)
    B0 = spec.torus.B0(spec.mu, spec.hbar)
    blocks = spin_blocks(assemble(spec))
    thr = 0.5 * 2 * spec.mu * spec.hbar * abs(B0)
    assert count_below(blocks[favored_block(N)], thr).count == abs(N)
    assert count_below(blocks[1 - favored_block(N)], thr).count == 0


def test_torus_flux_sign_swaps_blocks():
    up_p, down_p = spin_blocks(assemble(torus_spec(1)))
    up_m, down_m = spin_blocks(assemble(torus_spec(-1)))
    np.testing.assert_allclose(eigen_dense(up_p), eigen_dense(down_m), atol=1e-9)
    np.testing.assert_allclose(eigen_dense(down_p), eigen_dense(up_m), atol=1e-9)


def test_torus_plaquette_flux_uniform():
    spec = torus_spec(3, n=12)
    B0 = spec.torus.B0(spec.mu, spec.hbar)
    g = spec.grid
    n1, n2 = g.shape[0], g.shape[1]
    theta = {}
    for d, (p, q, th) in torus_links(spec).items():
        for a, b, t in zip(p, q, th):
            theta[(a, b)] = t
    period = 2 * np.pi * spec.hbar / spec.mu
    h1, h2 = g.spacing[0], g.spacing[1]
    for i in range(n1):
        for j in range(n2):
            p = i + n1 * j
            p1 = (i + 1) % n1 + n1 * j
            p2 = i + n1 * ((j + 1) % n2)
            p12 = (i + 1) % n1 + n1 * ((j + 1) % n2)
            circ = theta[(p, p1)] + theta[(p1, p12)] - theta[(p2, p12)] - theta[(p, p2)]
            r = (circ - B0 * h1 * h2) / period
            assert abs(r - np.rint(r)) < 1e-9


def test_torus_fluctuating_field_keeps_zero_modes():
    g = torus_grid(1.0, 1.0, 32, 32)
    hbar, mu, N = 0.05, 1.0, 3
    B0 = 2 * np.pi * hbar * N
    B3 = ScalarFieldSample(g, B0 * (1 + 0.3 * np.cos(2 * np.pi * g.mesh()[0])))
    torus = torus_spec_from_field(B3, 1.0, 1.0, mu, hbar)
    assert torus.N == N
    spec = OperatorSpec("torus-pauli", hbar, g, mu, torus=torus)
    block = spin_blocks(assemble(spec))[favored_block(N)]
    ev = eigen_dense(block)
    assert np.all(np.abs(ev[:N]) < 0.05 * mu * hbar * B0)
    assert ev[N] > 0.5 * mu * hbar * B0


def test_torus_non_integer_flux():
    g = torus_grid(1.0, 1.0, 8, 8)
    with pytest.raises(NonIntegerFlux):
        torus_spec_from_field(ScalarFieldSample(g, 1.0), 1.0, 1.0, 1.0, 0.05)


def test_coo_roundtrip(tmp_path):
    H = assemble(varying_field_spec(n=6))
    export_coo(H, tmp_path / "h.txt")
    back = import_coo(tmp_path / "h.txt")
    assert (back.matrix != H.matrix).nnz == 0
