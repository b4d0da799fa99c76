"""Sparse lattice discretizations of magnetic Schrodinger, Pauli and Dirac operators.

The kinetic part uses Peierls link phases: the hopping from node p to its
neighbour q is  -(hbar/h)^2 * exp(-i (mu/hbar) int_p^q a . dl),  so a gauge
change a -> a + grad chi is exactly a diagonal unitary conjugation.

Box problems use Dirichlet conditions by discarding the boundary nodes of
every active axis.  Multi-component operators are laid out component-major:
index = component * n_spatial + node, with nodes ordered x fastest.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import GridTooSmall, NonIntegerFlux
from .fieldlab import (
    GridBox,
    ScalarFieldSample,
    VectorFieldSample,
    discrete_curl,
    gauge_from_field,
    sample_vector,
)
from .speccount import SparseHermitian

KINDS = ("schrodinger", "pauli", "dirac", "torus-pauli")

SIGMA = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
ALPHA = tuple(np.block([[np.zeros((2, 2)), s], [s, np.zeros((2, 2))]]) for s in SIGMA)
BETA = np.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)


@dataclass(frozen=True)
class TorusSpec:
    """Periodic cell [0,T1) x [0,T2) (x [0,T3)) carrying an integer flux N."""

    T1: float
    T2: float
    N: int
    T3: float | None = None
    B_fluct: ScalarFieldSample | None = None  # zero-mean periodic part of B3

    def B0(self, mu: float, hbar: float) -> float:
        """Constant field making mu * flux / hbar equal to N exactly."""
        if self.N == 0:
            return 0.0
        if mu == 0:
            raise NonIntegerFlux(float(abs(self.N)))
        return 2.0 * np.pi * hbar * self.N / (mu * self.T1 * self.T2)

    def flux(self, mu: float, hbar: float) -> float:
        return self.B0(mu, hbar) * self.T1 * self.T2 / (2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    kind: str
    hbar: float
    grid: GridBox
    mu: float = 0.0
    B: VectorFieldSample | None = None
    a: VectorFieldSample | Callable | None = None
    potential: ScalarFieldSample | None = None
    wilson: float = 1.0
    torus: TorusSpec | None = None
    chi: ScalarFieldSample | None = None  # optional gauge function added to a

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if self.wilson < 0:
            raise ValueError("wilson must be nonnegative")
        for f in (self.B, self.potential, self.chi):
            if f is not None and f.grid != self.grid:
                raise ValueError("fields must share the operator grid")
        if isinstance(self.a, VectorFieldSample) and self.a.grid != self.grid:
            raise ValueError("fields must share the operator grid")
        if self.kind == "torus-pauli" and self.torus is None:
            raise ValueError("torus-pauli needs a TorusSpec")

    @property
    def components(self) -> int:
        return {"schrodinger": 1, "pauli": 2, "dirac": 4, "torus-pauli": 2}[self.kind]


def torus_grid(T1: float, T2: float, n1: int, n2: int, T3: float | None = None, n3: int = 1) -> GridBox:
    """Grid on the periodic cell; the last node sits one spacing before the period."""
    up3 = 0.0 if T3 is None or n3 == 1 else T3 - T3 / n3
    return GridBox((0.0, 0.0, 0.0), (T1 - T1 / n1, T2 - T2 / n2, up3), (n1, n2, n3))


def constant_field_spec(kind: str, hbar: float, grid: GridBox, mu: float, B, W=0.0, **kw) -> OperatorSpec:
    """Convenience: constant B (3-vector) and constant or callable potential."""
    Bf = sample_vector(grid, B)
    Wf = ScalarFieldSample(grid, W(*grid.mesh()) if callable(W) else W)
    return OperatorSpec(kind, hbar, grid, mu, B=Bf, potential=Wf, **kw)


# --- lattice bookkeeping --------------------------------------------------


def _unknown_mask(grid: GridBox, periodic: bool) -> np.ndarray:
    mask = np.ones(grid.shape, dtype=bool)
    if periodic:
        return mask
    for d in range(3):
        if grid.active[d]:
            sl = [slice(None)] * 3
            sl[d] = 0
            mask[tuple(sl)] = False
            sl[d] = -1
            mask[tuple(sl)] = False
    return mask


def _strides(grid: GridBox) -> tuple[int, int, int]:
    nx, ny, _ = grid.shape
    return (1, nx, nx * ny)


def _links(grid: GridBox, d: int, periodic: bool):
    """Flat node pairs (p, q) along axis d; q is the +e_d neighbour.  Returns (p, q, wrapped)."""
    n = grid.shape[d]
    idx = np.arange(grid.size).reshape(grid.shape, order="F")
    sl_p = [slice(None)] * 3
    sl_q = [slice(None)] * 3
    sl_p[d] = slice(0, n - 1)
    sl_q[d] = slice(1, n)
    p = idx[tuple(sl_p)].ravel(order="F")
    q = idx[tuple(sl_q)].ravel(order="F")
    wrapped = np.zeros(len(p), dtype=bool)
    if periodic:
        sl_p[d] = n - 1
        sl_q[d] = 0
        pw = idx[tuple(sl_p)].ravel(order="F")
        qw = idx[tuple(sl_q)].ravel(order="F")
        p = np.concatenate([p, pw])
        q = np.concatenate([q, qw])
        wrapped = np.concatenate([wrapped, np.ones(len(pw), dtype=bool)])
    return p, q, wrapped


def _resolve_gauge(spec: OperatorSpec):
    if spec.a is not None:
        return spec.a
    if spec.B is None or spec.mu == 0:
        return None
    return gauge_from_field(spec.B)


def _link_integrals(spec: OperatorSpec, d: int, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """int_p^q a . dl along axis d (non-wrapped links)."""
    grid = spec.grid
    h = grid.spacing[d]
    a = _resolve_gauge(spec)
    if a is None:
        theta = np.zeros(len(p))
    elif isinstance(a, VectorFieldSample):
        comp = a.components[d].ravel(order="F")
        theta = 0.5 * h * (comp[p] + comp[q])
    else:
        pts = grid.points()
        mid = 0.5 * (pts[p] + pts[q])
        theta = h * np.asarray(a(mid[:, 0], mid[:, 1], mid[:, 2])[d], dtype=float) * np.ones(len(p))
    if spec.chi is not None:
        chi = spec.chi.flat()
        theta = theta + chi[q] - chi[p]
    return theta


def _hopping(grid: GridBox, hbar: float, mu: float, links) -> sp.csr_matrix:
    """Kinetic matrix sum_d (hbar/h_d)^2 (2 - U - U*) over all nodes (no boundary removal)."""
    n = grid.size
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    for d, (p, q, theta) in links.items():
        t = (hbar / grid.spacing[d]) ** 2
        diag += 2.0 * t
        u = -t * np.exp(-1j * (mu / hbar) * theta)
        rows += [p, q]
        cols += [q, p]
        vals += [u, np.conj(u)]
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag.astype(complex))
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


def _restrict(M: sp.spmatrix, keep: np.ndarray) -> sp.csr_matrix:
    return sp.csr_matrix(M)[keep][:, keep]


def _box_links(spec: OperatorSpec) -> dict:
    links = {}
    for d in range(3):
        if spec.grid.active[d]:
            p, q, _ = _links(spec.grid, d, periodic=False)
            links[d] = (p, q, _link_integrals(spec, d, p, q))
    return links


def _keep(spec: OperatorSpec) -> np.ndarray:
    grid = spec.grid
    if grid.dim == 0:
        raise GridTooSmall("operator needs at least one active axis")
    keep = np.flatnonzero(_unknown_mask(grid, periodic=False).ravel(order="F"))
    if len(keep) == 0:
        raise GridTooSmall("no interior nodes")
    return keep


def _diag(values: np.ndarray) -> sp.csr_matrix:
    return sp.diags(np.asarray(values, dtype=complex), format="csr")


def _potential(spec: OperatorSpec) -> np.ndarray:
    if spec.potential is None:
        return np.zeros(spec.grid.size)
    return spec.potential.flat()


def _field(spec: OperatorSpec) -> np.ndarray:
    """B components as (3, size) flat arrays; derived from a when B is absent."""
    if spec.B is not None:
        return np.stack([c.ravel(order="F") for c in spec.B.components])
    if isinstance(spec.a, VectorFieldSample):
        return np.stack([c.ravel(order="F") for c in discrete_curl(spec.a).components])
    if spec.a is not None:
        raise ValueError("a callable gauge needs B supplied for the spin coupling")
    return np.zeros((3, spec.grid.size))


def _hermitize(M: sp.spmatrix) -> sp.csr_matrix:
    """Exact symmetrization; all builders produce conjugate pairs already, this removes round-off."""
    M = sp.csr_matrix(M)
    M = 0.5 * (M + M.conj().T)
    M.sum_duplicates()
    M.eliminate_zeros()
    return M.tocsr()


def kinetic_matrix(spec: OperatorSpec) -> sp.csr_matrix:
    """Restricted magnetic Laplacian (-i hbar grad - mu a)^2 on the unknown nodes."""
    keep = _keep(spec)
    return _restrict(_hopping(spec.grid, spec.hbar, spec.mu, _box_links(spec)), keep)


def assemble_schrodinger(spec: OperatorSpec) -> SparseHermitian:
    if spec.kind != "schrodinger":
        raise ValueError("spec.kind must be schrodinger")
    keep = _keep(spec)
    H = _hopping(spec.grid, spec.hbar, spec.mu, _box_links(spec)) + _diag(_potential(spec))
    return SparseHermitian(_hermitize(_restrict(H, keep)), {"kind": "schrodinger", "nodes": keep})


def _pauli_from_parts(H0: sp.spmatrix, Bflat: np.ndarray, W: np.ndarray, mu: float, hbar: float) -> sp.csr_matrix:
    n = H0.shape[0]
    H = sp.kron(sp.identity(2), H0 + _diag(W))
    for k in range(3):
        if np.any(Bflat[k] != 0):
            H = H - mu * hbar * sp.kron(sp.csr_matrix(SIGMA[k]), _diag(Bflat[k]))
    return sp.csr_matrix(H, shape=(2 * n, 2 * n))


def assemble_pauli(spec: OperatorSpec) -> SparseHermitian:
    """(-i hbar grad - mu a)^2 - mu hbar sigma.B + W on two-spinors."""
    if spec.kind != "pauli":
        raise ValueError("spec.kind must be pauli")
    keep = _keep(spec)
    H0 = _restrict(_hopping(spec.grid, spec.hbar, spec.mu, _box_links(spec)), keep)
    Bflat = _field(spec)[:, keep]
    H = _pauli_from_parts(H0, Bflat, _potential(spec)[keep], spec.mu, spec.hbar)
    return SparseHermitian(_hermitize(H), {"kind": "pauli", "nodes": keep})


def _covariant_derivative(grid: GridBox, hbar: float, mu: float, d: int, link) -> sp.csr_matrix:
    """Centred -i hbar D_d with link phases: entry [p, q] = -i hbar U_pq / (2h)."""
    p, q, theta = link
    n = grid.size
    u = -1j * hbar / (2.0 * grid.spacing[d]) * np.exp(-1j * (mu / hbar) * theta)
    return sp.csr_matrix(
        (np.concatenate([u, np.conj(u)]), (np.concatenate([p, q]), np.concatenate([q, p]))),
        shape=(n, n),
    )


def assemble_dirac(spec: OperatorSpec) -> SparseHermitian:
    """alpha.(-i hbar grad - mu a) + beta + V, with an optional Wilson term on beta."""
    if spec.kind != "dirac":
        raise ValueError("spec.kind must be dirac")
    keep = _keep(spec)
    grid = spec.grid
    links = _box_links(spec)
    m = len(keep)
    D = sp.kron(sp.csr_matrix(BETA), sp.identity(m)) + sp.kron(sp.identity(4), _diag(_potential(spec)[keep]))
    for d, link in links.items():
        Pi = _restrict(_covariant_derivative(grid, spec.hbar, spec.mu, d, link), keep)
        D = D + sp.kron(sp.csr_matrix(ALPHA[d]), Pi)
        if spec.wilson > 0:
            Hd = _restrict(_hopping(grid, spec.hbar, spec.mu, {d: link}), keep)
            D = D + spec.wilson * grid.spacing[d] / (2.0 * spec.hbar) * sp.kron(sp.csr_matrix(BETA), Hd)
    return SparseHermitian(_hermitize(D), {"kind": "dirac", "nodes": keep})


def torus_gauge_fluctuation(torus: TorusSpec, grid: GridBox) -> np.ndarray:
    """Periodic (a1, a2) with curl equal to the zero-mean part of B3, from an FFT Poisson solve."""
    out = np.zeros((3,) + grid.shape)
    if torus.B_fluct is None:
        return out
    B1 = torus.B_fluct.values
    B1 = B1 - B1.mean(axis=(0, 1), keepdims=True)
    n1, n2 = grid.shape[0], grid.shape[1]
    k1 = 2 * np.pi * np.fft.fftfreq(n1, d=torus.T1 / n1)
    k2 = 2 * np.pi * np.fft.fftfreq(n2, d=torus.T2 / n2)
    K1, K2 = np.meshgrid(k1, k2, indexing="ij")
    K1, K2 = K1[..., None], K2[..., None]
    k2sum = K1**2 + K2**2
    k2sum[0, 0] = 1.0
    phi_hat = -np.fft.fft2(B1, axes=(0, 1)) / k2sum
    phi_hat[0, 0] = 0.0
    out[0] = -np.real(np.fft.ifft2(1j * K2 * phi_hat, axes=(0, 1)))
    out[1] = np.real(np.fft.ifft2(1j * K1 * phi_hat, axes=(0, 1)))
    return out


def torus_links(spec: OperatorSpec) -> dict:
    """Link integrals on the torus including the magnetic-translation twists on wrapped links."""
    torus, grid = spec.torus, spec.grid
    B0 = torus.B0(spec.mu, spec.hbar) if spec.mu > 0 else 0.0
    pts = grid.points()
    a1 = torus_gauge_fluctuation(torus, grid)
    links = {}
    for d in range(3):
        if not grid.active[d]:
            continue
        p, q, wrapped = _links(grid, d, periodic=True)
        h = grid.spacing[d]
        comp = a1[d].ravel(order="F")
        theta = 0.5 * h * (comp[p] + comp[q])
        if d == 0:
            x2 = pts[p, 1]
            theta += -0.5 * B0 * x2 * h
            theta[wrapped] += -0.5 * B0 * torus.T1 * x2[wrapped]
        elif d == 1:
            x1 = pts[p, 0]
            theta += 0.5 * B0 * x1 * h
            theta[wrapped] += 0.5 * B0 * torus.T2 * x1[wrapped]
        if spec.chi is not None:
            chi = spec.chi.flat()
            theta = theta + chi[q] - chi[p]
        links[d] = (p, q, theta)
    return links


def assemble_torus_pauli(spec: OperatorSpec) -> SparseHermitian:
    """Pauli operator on the periodic cell with constant field B0 plus a periodic fluctuation."""
    if spec.kind != "torus-pauli":
        raise ValueError("spec.kind must be torus-pauli")
    torus, grid = spec.torus, spec.grid
    if spec.mu == 0 and torus.N != 0:
        raise NonIntegerFlux(float(abs(torus.N)))
    for d in range(3):
        if grid.active[d] and grid.shape[d] < 3:
            raise GridTooSmall("torus axes need at least 3 points")
    B0 = torus.B0(spec.mu, spec.hbar) if spec.mu > 0 else 0.0
    H0 = _hopping(grid, spec.hbar, spec.mu, torus_links(spec))
    B3 = np.full(grid.size, B0)
    if torus.B_fluct is not None:
        v = torus.B_fluct.values
        B3 = B3 + (v - v.mean(axis=(0, 1), keepdims=True)).ravel(order="F")
    Bflat = np.stack([np.zeros(grid.size), np.zeros(grid.size), B3])
    H = _pauli_from_parts(H0, Bflat, _potential(spec), spec.mu, spec.hbar)
    return SparseHermitian(_hermitize(H), {"kind": "torus-pauli", "B0": B0, "nodes": np.arange(grid.size)})


def torus_spec_from_field(B3: ScalarFieldSample, T1: float, T2: float, mu: float, hbar: float,
                          tol: float = 1e-8, T3: float | None = None) -> TorusSpec:
    """Split a periodic B3 into mean and fluctuation; the mean must carry an integer flux."""
    flux = float(np.mean(B3.values)) * T1 * T2 / (2.0 * np.pi)
    val = mu * flux / hbar
    N = int(np.rint(val))
    if abs(val - N) > tol:
        raise NonIntegerFlux(abs(val - N))
    return TorusSpec(T1, T2, N, T3, B3)


def assemble(spec: OperatorSpec) -> SparseHermitian:
    return {
        "schrodinger": assemble_schrodinger,
        "pauli": assemble_pauli,
        "dirac": assemble_dirac,
        "torus-pauli": assemble_torus_pauli,
    }[spec.kind](spec)


def spin_blocks(H: SparseHermitian, atol: float = 0.0) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Split a two-component operator into its sigma3 = +1 and sigma3 = -1 diagonal blocks.

    Raises ValueError when the off-diagonal spin blocks are not (numerically) zero.
    """
    M = H.matrix
    n = M.shape[0] // 2
    off = M[:n, n:]
    if off.nnz and abs(off).max() > atol:
        raise ValueError("spin blocks are coupled")
    return sp.csr_matrix(M[:n, :n]), sp.csr_matrix(M[n:, n:])


def favored_block(N: int) -> int:
    """Index (0 for sigma3 = +1, 1 for sigma3 = -1) of the block holding the |N| zero modes."""
    return 0 if N >= 0 else 1


def with_gauge_change(spec: OperatorSpec, chi: ScalarFieldSample) -> OperatorSpec:
    base = spec.chi.values if spec.chi is not None else 0.0
    return replace(spec, chi=ScalarFieldSample(spec.grid, base + chi.values))


def export_coo(H: SparseHermitian, path) -> None:
    M = sp.coo_matrix(H.matrix)
    data = np.column_stack([M.row, M.col, M.data.real, M.data.imag])
    np.savetxt(path, data, fmt=["%d", "%d", "%.17g", "%.17g"], header=f"{M.shape[0]} {M.shape[1]} {M.nnz}")


def import_coo(path) -> SparseHermitian:
    with open(path) as fh:
        n, m, _ = (int(v) for v in fh.readline().lstrip("#").split())
    data = np.loadtxt(path, ndmin=2)
    M = sp.csr_matrix((data[:, 2] + 1j * data[:, 3], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(n, m))
    return SparseHermitian(M)
