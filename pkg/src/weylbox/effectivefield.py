"""Effective magnetic field: the largest box scale l with l^2 <|B|^p>_box^(1/p) <= 1.

For a node x the box Q(x, l) is the cube (3D) or square (2D) of side l centred
at x.  |B|^p is treated as piecewise constant on the dual cells of the grid
and zero outside it, so box integrals are exact for that interpolant and cost
O(1) each through a table of cumulative integrals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidExponent, NonpositiveLambda
from .fieldlab import GridBox, ScalarFieldSample, VectorFieldSample

SCAN_POINTS = 64


@dataclass(frozen=True)
class EffectiveFieldParams:
    p: float = 2.0
    l_max: float | None = None  # defaults to the domain diameter
    tol: float = 1e-10
    dim: int = 3

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        floor = 1.5 if self.dim == 3 else 1.0
        if not self.p > floor:
            raise InvalidExponent(f"p must exceed {floor} in dimension {self.dim}, got {self.p}")
        if self.l_max is not None and not self.l_max > 0:
            raise ValueError("l_max must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class EffectiveFieldResult:
    length: np.ndarray
    field: np.ndarray
    capped: np.ndarray


class BoxIntegrator:
    """Exact integrals of a piecewise-constant dual-cell field over axis-aligned boxes."""

    def __init__(self, values: np.ndarray, grid: GridBox, axes: tuple[int, ...]):
        self.axes = axes
        self.bounds = [grid.dual_cell_bounds(d) for d in axes]
        vals = np.asarray(values, dtype=float)
        vals = vals.reshape([grid.shape[d] for d in axes])
        widths = [np.diff(b) for b in self.bounds]
        cell = vals.copy()
        for i, w in enumerate(widths):
            shape = [1] * len(axes)
            shape[i] = len(w)
            cell = cell * w.reshape(shape)
        C = cell
        for i in range(len(axes)):
            C = np.cumsum(C, axis=i)
            pad = [(0, 0)] * len(axes)
            pad[i] = (1, 0)
            C = np.pad(C, pad)
        self.table = C

    def _cumulative(self, pts: np.ndarray) -> np.ndarray:
        """Integral over [lower corner, pt] for each row of pts (already restricted to self.axes)."""
        idx, frac = [], []
        for i, b in enumerate(self.bounds):
            x = np.clip(pts[:, i], b[0], b[-1])
            j = np.clip(np.searchsorted(b, x, side="right") - 1, 0, len(b) - 2)
            w = b[j + 1] - b[j]
            t = np.where(w > 0, (x - b[j]) / np.where(w > 0, w, 1.0), 0.0)
            idx.append(j)
            frac.append(t)
        out = np.zeros(len(pts))
        n = len(self.bounds)
        for corner in range(1 << n):
            wgt = np.ones(len(pts))
            ind = []
            for i in range(n):
                bit = (corner >> i) & 1
                wgt = wgt * (frac[i] if bit else 1.0 - frac[i])
                ind.append(idx[i] + bit)
            out += wgt * self.table[tuple(ind)]
        return out

    def box(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        n = len(self.bounds)
        out = np.zeros(len(lo))
        for corner in range(1 << n):
            pt = np.empty_like(lo)
            sign = 1.0
            for i in range(n):
                if (corner >> i) & 1:
                    pt[:, i] = hi[:, i]
                else:
                    pt[:, i] = lo[:, i]
                    sign = -sign
            out += sign * self._cumulative(pt)
        return out


def _magnitude(B) -> tuple[np.ndarray, GridBox]:
    if isinstance(B, VectorFieldSample):
        return B.norm().values, B.grid
    if isinstance(B, ScalarFieldSample):
        return np.abs(B.values), B.grid
    raise TypeError("B must be a field sample")


def _plane_axes(grid: GridBox, dim: int) -> tuple[int, ...]:
    act = tuple(d for d in range(3) if grid.active[d])
    if dim == 3:
        if len(act) != 3:
            raise ValueError("3D effective field needs a grid with three active axes")
        return act
    if not (grid.active[0] and grid.active[1]):
        raise ValueError("2D effective field needs active x1 and x2 axes")
    return (0, 1)


def _default_lmax(grid: GridBox) -> float:
    return float(np.sqrt(sum(e * e for e in grid.extent)))


def _solve(integ: BoxIntegrator, pts: np.ndarray, p: float, dim: int, l_max: float, tol: float, bmax: float):
    m = len(pts)
    if bmax == 0 or m == 0:
        return np.full(m, l_max), np.ones(m, dtype=bool)

    def F(l, sel):
        half = 0.5 * l[:, None]
        I = integ.box(pts[sel] - half, pts[sel] + half)
        return l**2 * (np.maximum(I, 0.0) / l**dim) ** (1.0 / p)

    l_lo = min(0.5 / np.sqrt(bmax), l_max)
    scan = np.geomspace(l_lo, l_max, SCAN_POINTS) if l_lo < l_max else np.array([l_max])
    Fs = np.empty((m, len(scan)))
    for j, l in enumerate(scan):
        Fs[:, j] = F(np.full(m, l), np.arange(m))
    ok = Fs <= 1.0
    # last scan point still satisfying the condition
    last = np.where(ok.any(axis=1), len(scan) - 1 - np.argmax(ok[:, ::-1], axis=1), -1)
    capped = last == len(scan) - 1
    length = np.where(capped, l_max, 0.0)
    todo = np.flatnonzero(~capped)
    a = np.where(last[todo] >= 0, scan[np.maximum(last[todo], 0)], 0.0)
    b = scan[last[todo] + 1]
    for _ in range(200):
        if len(todo) == 0 or np.max(b - a) <= tol:
            break
        mid = 0.5 * (a + b)
        good = F(mid, todo) <= 1.0
        a = np.where(good, mid, a)
        b = np.where(good, b, mid)
    length[todo] = a
    return length, capped


def effective_length_map(B, params: EffectiveFieldParams, points: np.ndarray | None = None) -> EffectiveFieldResult:
    """l_p, b_p = l_p^-2 and the cap flag at the given points (default: every grid node).

    In 2D mode with a 3D grid each point uses the x1-x2 slice nearest to it.
    """
    mag, grid = _magnitude(B)
    axes = _plane_axes(grid, params.dim)
    l_max = params.l_max if params.l_max is not None else _default_lmax(grid)
    g = mag**params.p
    pts = grid.points() if points is None else np.atleast_2d(np.asarray(points, dtype=float))
    length = np.zeros(len(pts))
    capped = np.zeros(len(pts), dtype=bool)
    if params.dim == 3 or grid.shape[2] == 1:
        groups = [(np.arange(len(pts)), g)]
    else:
        z = grid.axes()[2]
        k = np.clip(np.rint((pts[:, 2] - z[0]) / grid.spacing[2]).astype(int), 0, len(z) - 1)
        groups = [(np.flatnonzero(k == kk), g[:, :, kk]) for kk in np.unique(k)]
    for sel, gv in groups:
        integ = BoxIntegrator(gv, grid, axes)
        l, c = _solve(integ, pts[sel][:, axes], params.p, params.dim, l_max, params.tol, float(np.max(gv) ** (1 / params.p)))
        length[sel] = l
        capped[sel] = c
    return EffectiveFieldResult(length, length**-2.0, capped)


def effective_length(B, x, params: EffectiveFieldParams) -> float:
    return float(effective_length_map(B, params, np.asarray(x, dtype=float)[None, :]).length[0])


def effective_field(B, x, params: EffectiveFieldParams) -> float:
    return float(effective_length(B, x, params) ** -2.0)


def box_functional(B, x, l: float, params: EffectiveFieldParams) -> float:
    """F(l) = l^2 (l^-dim int_{Q(x,l)} |B|^p)^(1/p) at one point."""
    mag, grid = _magnitude(B)
    axes = _plane_axes(grid, params.dim)
    g = mag**params.p
    x = np.asarray(x, dtype=float)
    if params.dim == 2 and grid.shape[2] > 1:
        k = int(np.clip(np.rint((x[2] - grid.lower[2]) / grid.spacing[2]), 0, grid.shape[2] - 1))
        g = g[:, :, k]
    integ = BoxIntegrator(g, grid, axes)
    c = x[list(axes)][None, :]
    I = integ.box(c - 0.5 * l, c + 0.5 * l)[0]
    return float(l**2 * (max(I, 0.0) / l**params.dim) ** (1 / params.p))


_CACHE: dict = {}


def effective_field_map(B, params: EffectiveFieldParams) -> np.ndarray:
    """b_p at every node of B's grid, cached per (field object, params)."""
    key = (id(B), params)
    hit = _CACHE.get(key)
    if hit is not None and hit[0] is B:
        return hit[1]
    res = effective_length_map(B, params).field.reshape(B.grid.shape, order="F")
    res.setflags(write=False)
    if len(_CACHE) > 32:
        _CACHE.clear()
    _CACHE[key] = (B, res)
    return res


def shen_bound(W: ScalarFieldSample, B, mu: float, hbar: float, lam: float, params: EffectiveFieldParams,
               kind: str = "trace", region=None, b_eff=None) -> float:
    """Effective-field bounds with unit constants.

    trace:  lam^-1 { hbar^-3 int W_-^(5/2) + mu^(3/2) hbar^(-3/2) int b_p^(3/2) W_- }
    count:  hbar^-3 lam^(-1/2) { int W_-^2 + mu hbar int b_p W_- }   (2D effective field)

    ``region`` restricts the integrals (GridBox or tessellation); ``b_eff``
    overrides the computed effective field.
    """
    if not lam > 0:
        raise NonpositiveLambda(f"lambda must be positive, got {lam}")
    grid = W.grid
    w = grid.cell_weights(region)
    wm = np.maximum(-W.values, 0.0)
    if b_eff is None:
        if kind == "count" and params.dim != 2:
            params = EffectiveFieldParams(params.p, params.l_max, params.tol, 2)
        b = effective_field_map(B, params) if np.any(wm > 0) else np.zeros(grid.shape)
    else:
        b = np.broadcast_to(np.asarray(getattr(b_eff, "values", b_eff), dtype=float), grid.shape)
    if kind == "trace":
        return float((np.sum(w * wm**2.5) / hbar**3 + mu**1.5 * hbar**-1.5 * np.sum(w * b**1.5 * wm)) / lam)
    if kind == "count":
        return float((np.sum(w * wm**2) + mu * hbar * np.sum(w * b * wm)) / (hbar**3 * np.sqrt(lam)))
    raise ValueError(f"unknown kind {kind!r}")
