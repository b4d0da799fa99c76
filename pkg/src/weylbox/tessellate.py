"""Cube tessellations, smooth partitions of unity and two-sided bracketing of counts.

Bracketing on the lattice
-------------------------
Lower bound: the strict interiors S_k of the cubes are decoupled node sets, so
by Cauchy interlacing  sum_k N(H|S_k) <= N(H).

Upper bound: for real psi_k with sum psi_k^2 = 1,

    H = sum_k psi_k H psi_k + E,   E_xy = H_xy * 1/2 sum_k (psi_k(x) - psi_k(y))^2,

and E >= -diag(sum_y |E_xy|) = -hbar^2 G.  With a penalty P >= hbar^2 G,
N(H) <= sum_k N((H - P)|supp psi_k).  The penalty is C_pu hbar^2 / (rho r)^2 on
the set where G > 0, with C_pu measured from the constructed partition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import GridTooCoarseForMargin, RTooLarge
from .fieldlab import GridBox

_EPS = 1e-9


@dataclass(frozen=True)
class Tessellation:
    """K congruent axis-aligned cubes of side r laid out from ``origin`` on the active axes."""

    origin: tuple[float, float, float]
    r: float
    counts: tuple[int, int, int]  # cubes per axis; 1 on inactive axes
    active: tuple[bool, bool, bool]
    remainder: float = 0.0

    @property
    def n_cubes(self) -> int:
        return int(np.prod(self.counts))

    @property
    def dim(self) -> int:
        return sum(self.active)

    def _multi_index(self) -> np.ndarray:
        return np.stack(np.unravel_index(np.arange(self.n_cubes), self.counts, order="F"), axis=1)

    def cube_bounds(self) -> list[tuple[np.ndarray, np.ndarray]]:
        out = []
        o = np.asarray(self.origin, dtype=float)
        act = np.asarray(self.active)
        for idx in self._multi_index():
            lo = np.where(act, o + idx * self.r, -np.inf)
            hi = np.where(act, o + (idx + 1) * self.r, np.inf)
            out.append((lo, hi))
        return out

    def centers(self) -> np.ndarray:
        o = np.asarray(self.origin, dtype=float)
        act = np.asarray(self.active)
        return np.where(act, o + (self._multi_index() + 0.5) * self.r, o)

    def upper(self) -> np.ndarray:
        return np.asarray(self.origin) + np.asarray(self.counts) * self.r * np.asarray(self.active)

    def node_labels(self, grid: GridBox, strict: bool = False) -> np.ndarray:
        """Cube index of every node (-1 outside).

        Cubes are half-open [lo, hi) except that the outer upper faces belong to
        the last cube.  With ``strict`` only nodes in open cube interiors are labelled.
        """
        labels = np.zeros(grid.shape, dtype=np.int64)
        inside = np.ones(grid.shape, dtype=bool)
        stride = 1
        for d, x in enumerate(grid.axes()):
            shape = [1, 1, 1]
            shape[d] = len(x)
            if not self.active[d]:
                continue
            t = (x - self.origin[d]) / self.r
            tol = _EPS * max(1.0, abs(t).max())
            j = np.floor(t + tol).astype(np.int64)
            j = np.where((j == self.counts[d]) & (np.abs(t - self.counts[d]) <= tol), self.counts[d] - 1, j)
            ok = (j >= 0) & (j < self.counts[d]) & (t > -tol)
            if strict:
                frac = t - j
                ok &= (frac > tol) & (frac < 1 - tol)
            labels = labels + (stride * np.clip(j, 0, self.counts[d] - 1)).reshape(shape)
            inside &= ok.reshape(shape)
            stride *= self.counts[d]
        return np.where(inside, labels, -1)


def tessellate_domain(region: GridBox, r: float) -> Tessellation:
    """Largest block of r-cubes anchored at the lower corner of ``region``."""
    if not r > 0:
        raise ValueError("r must be positive")
    counts = []
    for d in range(3):
        if not region.active[d]:
            counts.append(1)
            continue
        n = int(np.floor(region.extent[d] / r + _EPS))
        if n < 1:
            raise RTooLarge(f"cube side {r} exceeds the region extent {region.extent[d]} on axis {d}")
        counts.append(n)
    K = int(np.prod(counts))
    rem = region.volume - K * r**region.dim
    return Tessellation(region.lower, float(r), tuple(counts), region.active, max(rem, 0.0) if rem > 1e-12 else 0.0)


def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


@dataclass(frozen=True, eq=False)
class PartitionOfUnity:
    psi: np.ndarray  # (K+1, *grid.shape); psi[0] is the margin/outside function
    rho: float
    margin: float  # rho * r
    C_pu: float
    G: np.ndarray  # 1/2 sum_neighbours h^-2 sum_k (psi_k(x) - psi_k(y))^2
    grid: GridBox

    def defect(self) -> float:
        return float(np.max(np.abs(np.sum(self.psi**2, axis=0) - 1.0)))

    def margin_set(self, atol: float = 1e-14) -> np.ndarray:
        return self.G > atol


def _neighbour_gradient(psi: np.ndarray, grid: GridBox) -> np.ndarray:
    G = np.zeros(grid.shape)
    for d in range(3):
        if not grid.active[d]:
            continue
        h = grid.spacing[d]
        diff = np.sum(np.diff(psi, axis=d + 1) ** 2, axis=0) / h**2
        pad_lo = [(0, 0)] * 3
        pad_hi = [(0, 0)] * 3
        pad_lo[d] = (1, 0)
        pad_hi[d] = (0, 1)
        G += 0.5 * (np.pad(diff, pad_lo) + np.pad(diff, pad_hi))
    return G


def partition_of_unity(tess: Tessellation, rho: float, grid: GridBox) -> PartitionOfUnity:
    """psi_k = phi_k / sqrt(sum_j phi_j^2) with quintic ramps of width rho*r inside each cube."""
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    m = rho * tess.r
    for d in range(3):
        if grid.active[d] and m / grid.spacing[d] < 4.0 - 1e-9:
            raise GridTooCoarseForMargin(
                f"margin {m:.4g} spans {m / grid.spacing[d]:.2f} spacings on axis {d}; need at least 4"
            )
    X = grid.mesh()
    K = tess.n_cubes
    phi = np.zeros((K + 1,) + grid.shape)
    for k, (lo, hi) in enumerate(tess.cube_bounds()):
        f = np.ones(grid.shape)
        for d in range(3):
            if tess.active[d]:
                dist = np.minimum(X[d] - lo[d], hi[d] - X[d])
                f = f * _smoothstep(dist / m)
        phi[k + 1] = f
    phi[0] = np.maximum(1.0 - np.max(phi[1:], axis=0), 0.0) if K else 1.0
    psi = phi / np.sqrt(np.sum(phi**2, axis=0))
    G = _neighbour_gradient(psi, grid)
    return PartitionOfUnity(psi, rho, m, float(np.max(G) * m * m), G, grid)


@dataclass(frozen=True)
class BracketResult:
    lower: int
    upper: int
    full: int
    penalty: float
    C_pu: float
    lower_parts: tuple[int, ...]
    upper_parts: tuple[int, ...]

    @property
    def sandwiched(self) -> bool:
        return self.lower <= self.full <= self.upper


def _component_index(sel: np.ndarray, m: int, ncomp: int) -> np.ndarray:
    return np.concatenate([c * m + sel for c in range(ncomp)])


def bracket_counts(spec, tess: Tessellation, rho: float, lam: float, pou: PartitionOfUnity | None = None) -> BracketResult:
    """lower <= N(H + lam) <= upper from Dirichlet decoupling and the lattice IMS bound."""
    from .magop import assemble
    from .speccount import count_below

    grid = spec.grid
    H = assemble(spec)
    M = sp.csr_matrix(H.matrix)
    nodes = np.asarray(H.meta["nodes"])
    m = len(nodes)
    ncomp = H.dim // m
    tau = -lam
    if pou is None:
        pou = partition_of_unity(tess, rho, grid)

    # which unknowns sit strictly inside which cube
    strict = tess.node_labels(grid, strict=True).ravel(order="F")[nodes]
    spatial = sp.csr_matrix(abs(M[:m, :m]) + sum(abs(M[c * m:(c + 1) * m, c * m:(c + 1) * m]) for c in range(1, ncomp)))
    spatial.setdiag(0)
    spatial.eliminate_zeros()
    coo = spatial.tocoo()
    cross = (strict[coo.row] >= 0) & (strict[coo.col] >= 0) & (strict[coo.row] != strict[coo.col])
    decoupled = strict.copy()
    decoupled[coo.row[cross]] = -1

    def count(A, sel):
        if len(sel) == 0:
            return 0
        idx = _component_index(sel, m, ncomp)
        return count_below(A[idx][:, idx], tau).count

    lower_parts = tuple(count(M, np.flatnonzero(decoupled == k)) for k in range(tess.n_cubes))

    penalty = pou.C_pu * spec.hbar**2 / pou.margin**2
    chi = pou.margin_set().ravel(order="F")[nodes].astype(float)
    P = sp.kron(sp.identity(ncomp), sp.diags(penalty * chi))
    Mp = sp.csr_matrix(M - P)
    upper_parts = [count(Mp, np.flatnonzero(strict == k)) for k in range(tess.n_cubes)]
    psi0 = pou.psi[0].ravel(order="F")[nodes]
    upper_parts.append(count(Mp, np.flatnonzero(psi0 > 0)))

    full = count_below(M, tau).count
    return BracketResult(
        int(sum(lower_parts)), int(sum(upper_parts)), int(full), float(penalty), pou.C_pu,
        lower_parts, tuple(upper_parts),
    )
