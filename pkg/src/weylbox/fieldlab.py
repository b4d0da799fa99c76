"""Grids, sampled fields, gauges and moduli of continuity.

Arrays are stored with shape ``grid.shape == (nx, ny, nz)`` and indexed
``[i, j, k]``.  Whenever a flat ordering is needed (files, matrices) the
x index runs fastest, i.e. numpy ``order="F"``.

An axis with a single point is *inactive*: the problem does not depend on
that coordinate and integrals ignore it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import RegularGridInterpolator
from scipy.spatial import cKDTree

from .errors import (
    CubeOutsideGrid,
    DivergenceTooLarge,
    GridMismatch,
    NotPiecewiseConstant,
)


@dataclass(frozen=True)
class GridBox:
    """Axis-aligned box sampled by a tensor grid that includes its faces."""

    lower: tuple[float, float, float]
    upper: tuple[float, float, float]
    shape: tuple[int, int, int]

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        shape = tuple(int(n) for n in self.shape)
        if not (len(lower) == len(upper) == len(shape) == 3):
            raise ValueError("GridBox needs three lower, upper and shape entries")
        for d in range(3):
            if shape[d] < 1:
                raise ValueError(f"axis {d}: need at least one point")
            if shape[d] == 1:
                continue
            if shape[d] < 3:
                raise ValueError(f"axis {d}: an active axis needs at least 3 points")
            if not upper[d] > lower[d]:
                raise ValueError(f"axis {d}: upper must exceed lower")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "shape", shape)

    @classmethod
    def cube(cls, side: float, points: int, dim: int = 3, origin: float = 0.0) -> "GridBox":
        lo = [origin] * 3
        hi = [origin + side if d < dim else origin for d in range(3)]
        shape = [points if d < dim else 1 for d in range(3)]
        return cls(tuple(lo), tuple(hi), tuple(shape))

    @property
    def active(self) -> tuple[bool, bool, bool]:
        return tuple(n > 1 for n in self.shape)

    @property
    def dim(self) -> int:
        return sum(self.active)

    @property
    def spacing(self) -> tuple[float, float, float]:
        return tuple(
            (self.upper[d] - self.lower[d]) / (self.shape[d] - 1) if self.shape[d] > 1 else 0.0
            for d in range(3)
        )

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def extent(self) -> tuple[float, float, float]:
        return tuple(self.upper[d] - self.lower[d] for d in range(3))

    @property
    def volume(self) -> float:
        """Measure over the active axes."""
        return float(np.prod([e for e, a in zip(self.extent, self.active) if a]))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lower) + np.asarray(self.upper))

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(self.lower[d], self.upper[d], self.shape[d]) for d in range(3)]

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(np.meshgrid(*self.axes(), indexing="ij"))

    def points(self) -> np.ndarray:
        """Node coordinates, shape (size, 3), x fastest."""
        X = self.mesh()
        return np.stack([c.ravel(order="F") for c in X], axis=1)

    def dual_cell_bounds(self, d: int) -> np.ndarray:
        """Boundaries of the node-centred cells along axis ``d`` (clipped to the box)."""
        x = self.axes()[d]
        if len(x) == 1:
            return np.array([x[0], x[0]])
        mids = 0.5 * (x[:-1] + x[1:])
        return np.concatenate([[x[0]], mids, [x[-1]]])

    def cell_weights(self, region=None) -> np.ndarray:
        """Quadrature weight of every node: the measure of its dual cell inside ``region``.

        ``region`` may be None (the whole box), another GridBox, or a
        tessellation exposing ``cube_bounds()``.  Constants integrate exactly.
        """
        if region is None:
            boxes = [(np.asarray(self.lower), np.asarray(self.upper))]
        elif isinstance(region, GridBox):
            boxes = [(np.asarray(region.lower), np.asarray(region.upper))]
        else:
            boxes = region.cube_bounds()
        w = np.zeros(self.shape)
        for lo, hi in boxes:
            factors = []
            for d in range(3):
                if not self.active[d]:
                    factors.append(np.ones(1))
                    continue
                b = self.dual_cell_bounds(d)
                ov = np.clip(np.minimum(b[1:], hi[d]) - np.maximum(b[:-1], lo[d]), 0.0, None)
                factors.append(ov)
            w += factors[0][:, None, None] * factors[1][None, :, None] * factors[2][None, None, :]
        return w

    def header(self) -> str:
        nx, ny, nz = self.shape
        return "grid {} {} {} {!r} {!r} {!r} {!r} {!r} {!r}".format(
            nx, ny, nz, *self.lower, *self.upper
        )


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class ScalarFieldSample:
    grid: GridBox
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 0:
            vals = np.full(self.grid.shape, float(vals))
        if vals.shape != self.grid.shape:
            vals = vals.reshape(self.grid.shape, order="F")
        if not np.all(np.isfinite(vals)):
            raise ValueError("scalar field has non-finite values")
        object.__setattr__(self, "values", _frozen(vals))

    def flat(self) -> np.ndarray:
        return self.values.ravel(order="F")

    def __neg__(self) -> "ScalarFieldSample":
        return ScalarFieldSample(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class VectorFieldSample:
    grid: GridBox
    components: np.ndarray

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float)
        if comps.shape == (3,):
            comps = comps[:, None, None, None] * np.ones((3,) + self.grid.shape)
        if comps.shape != (3,) + self.grid.shape:
            comps = np.stack([np.reshape(c, self.grid.shape, order="F") for c in comps])
        if not np.all(np.isfinite(comps)):
            raise ValueError("vector field has non-finite values")
        object.__setattr__(self, "components", _frozen(comps))

    def norm(self) -> ScalarFieldSample:
        return ScalarFieldSample(self.grid, np.sqrt(np.sum(self.components**2, axis=0)))

    def component(self, d: int) -> ScalarFieldSample:
        return ScalarFieldSample(self.grid, self.components[d])


@dataclass(frozen=True)
class ContinuityModulus:
    r: float
    sigma: float


# --- construction helpers -------------------------------------------------

FieldFunc = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def sample_scalar(grid: GridBox, f: FieldFunc | float) -> ScalarFieldSample:
    if callable(f):
        vals = np.broadcast_to(np.asarray(f(*grid.mesh()), dtype=float), grid.shape)
    else:
        vals = np.full(grid.shape, float(f))
    return ScalarFieldSample(grid, vals)


def sample_vector(grid: GridBox, fs: Sequence[FieldFunc | float]) -> VectorFieldSample:
    return VectorFieldSample(grid, np.stack([sample_scalar(grid, f).values for f in fs]))


def _check_same_grid(*fields) -> GridBox:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatch("fields live on different grids")
    return grid


def _derivative(values: np.ndarray, grid: GridBox, d: int) -> np.ndarray:
    if not grid.active[d]:
        return np.zeros_like(values)
    return np.gradient(values, grid.spacing[d], axis=d, edge_order=2)


def discrete_curl(a: VectorFieldSample) -> VectorFieldSample:
    g = a.grid
    c = a.components
    D = lambda f, d: _derivative(f, g, d)  # noqa: E731
    return VectorFieldSample(
        g,
        np.stack(
            [
                D(c[2], 1) - D(c[1], 2),
                D(c[0], 2) - D(c[2], 0),
                D(c[1], 0) - D(c[0], 1),
            ]
        ),
    )


def discrete_divergence(B: VectorFieldSample) -> ScalarFieldSample:
    g = B.grid
    return ScalarFieldSample(g, sum(_derivative(B.components[d], g, d) for d in range(3)))


def relative_divergence(B: VectorFieldSample) -> float:
    """max |div B| over the largest first derivative of any component.

    The scale is floored by max|B| / diameter so that round-off in a constant
    field does not count as divergence.
    """
    g = B.grid
    div = np.max(np.abs(discrete_divergence(B).values))
    diam = float(np.linalg.norm(g.extent))
    scale = max(
        max((np.max(np.abs(_derivative(B.components[k], g, d))) for k in range(3) for d in range(3)), default=0.0),
        float(np.max(np.abs(B.components))) / diam if diam > 0 else 0.0,
    )
    if scale == 0.0:
        return 0.0 if div == 0.0 else np.inf
    return float(div / scale)


# --- gauges ---------------------------------------------------------------


def _interp_along(values: np.ndarray, coords: np.ndarray, c: float, axis: int) -> np.ndarray:
    """Linear interpolation of ``values`` at coordinate ``c`` along ``axis`` (keepdims)."""
    n = len(coords)
    if n == 1:
        return np.take(values, [0], axis=axis)
    i = int(np.clip(np.searchsorted(coords, c) - 1, 0, n - 2))
    t = (c - coords[i]) / (coords[i + 1] - coords[i])
    v0 = np.take(values, [i], axis=axis)
    v1 = np.take(values, [i + 1], axis=axis)
    return (1.0 - t) * v0 + t * v1


def _integral_from(values: np.ndarray, coords: np.ndarray, c: float, axis: int) -> np.ndarray:
    """Trapezoid line integral  int_c^x values dt  along ``axis`` at every node."""
    if len(coords) == 1:
        return np.zeros_like(values)
    G = cumulative_trapezoid(values, coords, axis=axis, initial=0.0)
    return G - _interp_along(G, coords, c, axis)


def gauge_from_field(
    B: VectorFieldSample, center: Sequence[float] | None = None, tol: float = 1e-6
) -> VectorFieldSample:
    """Vector potential (a1, a2, 0) with curl a = B built from line integrals about ``center``.

    a1 = -1/2 int_{c2}^{x2} B3(x1, t, c3) dt + int_{c3}^{x3} B2(x1, x2, t) dt
    a2 =  1/2 int_{c1}^{x1} B3(t, x2, c3) dt - int_{c3}^{x3} B1(x1, x2, t) dt
    """
    rel = relative_divergence(B)
    if rel > tol:
        raise DivergenceTooLarge(rel, tol)
    g = B.grid
    c = g.center if center is None else np.asarray(center, dtype=float)
    x1, x2, x3 = g.axes()
    B1, B2, B3 = B.components
    B3_plane = _interp_along(B3, x3, c[2], axis=2) * np.ones_like(B3)
    a1 = -0.5 * _integral_from(B3_plane, x2, c[1], axis=1) + _integral_from(B2, x3, c[2], axis=2)
    a2 = 0.5 * _integral_from(B3_plane, x1, c[0], axis=0) - _integral_from(B1, x3, c[2], axis=2)
    return VectorFieldSample(g, np.stack([a1, a2, np.zeros_like(a1)]))


def cubewise_gauge(B: VectorFieldSample, tess, tol: float = 1e-6) -> VectorFieldSample:
    """``gauge_from_field`` applied separately in every cube about its centre (zero outside)."""
    g = B.grid
    labels = tess.node_labels(g)
    out = np.zeros((3,) + g.shape)
    for k, ctr in enumerate(tess.centers()):
        mask = labels == k
        if not mask.any():
            continue
        a = gauge_from_field(B, ctr, tol=tol).components
        out[:, mask] = a[:, mask]
    return VectorFieldSample(g, out)


def _center_values(field, tess) -> np.ndarray:
    """Field values at every cube centre, shape (K,) or (K, 3)."""
    g = field.grid
    vals = field.values if isinstance(field, ScalarFieldSample) else field.components
    active = [d for d in range(3) if g.active[d]]
    centers = np.asarray(tess.centers())
    lo, hi = np.asarray(g.lower), np.asarray(g.upper)
    eps = 1e-9 * max(max(g.extent), 1.0)
    for k, ctr in enumerate(centers):
        if np.any(ctr[active] < lo[active] - eps) or np.any(ctr[active] > hi[active] + eps):
            raise CubeOutsideGrid(k)
    axes = [g.axes()[d] for d in active]
    pts = centers[:, active] if active else np.zeros((len(centers), 0))

    def interp(arr):
        sub = arr.reshape([g.shape[d] for d in active]) if active else arr.reshape(())
        if not active:
            return np.full(len(centers), float(sub))
        return RegularGridInterpolator(axes, sub)(pts)

    if isinstance(field, ScalarFieldSample):
        return interp(vals)
    return np.stack([interp(vals[d]) for d in range(3)], axis=1)


def piecewise_constant(field, tess):
    """Replace ``field`` by its cube-centre value on each cube and by zero outside the cubes."""
    g = field.grid
    for k, (lo, hi) in enumerate(tess.cube_bounds()):
        for d in range(3):
            if g.active[d] and (lo[d] < g.lower[d] - 1e-12 or hi[d] > g.upper[d] + 1e-12):
                raise CubeOutsideGrid(k)
    labels = tess.node_labels(g)
    cv = _center_values(field, tess)
    inside = labels >= 0
    if isinstance(field, ScalarFieldSample):
        out = np.zeros(g.shape)
        out[inside] = cv[labels[inside]]
        return ScalarFieldSample(g, out)
    out = np.zeros((3,) + g.shape)
    for d in range(3):
        out[d][inside] = cv[labels[inside], d]
    return VectorFieldSample(g, out)


def linear_gauge(B_o: VectorFieldSample, tess, atol: float = 1e-12) -> VectorFieldSample:
    """Piecewise linear potential with curl equal to the piecewise constant ``B_o`` in each cube."""
    g = B_o.grid
    labels = tess.node_labels(g)
    X = g.mesh()
    out = np.zeros((3,) + g.shape)
    scale = max(np.max(np.abs(B_o.components)), 1.0)
    for k, ctr in enumerate(tess.centers()):
        mask = labels == k
        if not mask.any():
            continue
        vals = B_o.components[:, mask]
        b = vals[:, 0]
        if np.max(np.abs(vals - b[:, None])) > atol * scale:
            raise NotPiecewiseConstant(f"field varies inside cube {k}")
        dx = [X[d][mask] - ctr[d] for d in range(3)]
        out[0][mask] = -0.5 * b[2] * dx[1] + b[1] * dx[2]
        out[1][mask] = 0.5 * b[2] * dx[0] - b[0] * dx[2]
    return VectorFieldSample(g, out)


def modulus_of_continuity(B, r: float) -> ContinuityModulus:
    """sigma_r = max over node pairs closer than r of |B(x) - B(y)|."""
    if r <= 0:
        raise ValueError("r must be positive")
    g = B.grid
    pts = g.points()
    if isinstance(B, ScalarFieldSample):
        vals = B.flat()[:, None]
    else:
        vals = np.stack([c.ravel(order="F") for c in B.components], axis=1)
    tree = cKDTree(pts)
    # query_pairs is inclusive; shrink slightly to honour the strict inequality
    pairs = tree.query_pairs(r * (1.0 - 1e-12), output_type="ndarray")
    if len(pairs) == 0:
        return ContinuityModulus(r, 0.0)
    sigma = 0.0
    for chunk in np.array_split(pairs, max(1, len(pairs) // 2_000_000 + 1)):
        diff = vals[chunk[:, 0]] - vals[chunk[:, 1]]
        sigma = max(sigma, float(np.max(np.sqrt(np.sum(diff**2, axis=1)))))
    return ContinuityModulus(r, sigma)


def gauge_gap(a: VectorFieldSample, a_lin: VectorFieldSample, tess) -> np.ndarray:
    """Per-cube maximum of |a - a_lin| over the nodes of each cube."""
    g = _check_same_grid(a, a_lin)
    labels = tess.node_labels(g)
    diff = np.sqrt(np.sum((a.components - a_lin.components) ** 2, axis=0))
    gaps = np.zeros(tess.n_cubes)
    for k in range(tess.n_cubes):
        mask = labels == k
        if mask.any():
            gaps[k] = diff[mask].max()
    return gaps


def fitted_gauge_constant(gaps: np.ndarray, r: float, sigma: float) -> float:
    """Smallest C with gap_k <= C r sigma_r for every cube (0 when sigma vanishes)."""
    if sigma == 0.0:
        return 0.0
    return float(np.max(gaps) / (r * sigma))


# --- text I/O -------------------------------------------------------------


def write_field(path, field) -> None:
    g = field.grid
    if isinstance(field, ScalarFieldSample):
        data = field.flat()[:, None]
    else:
        data = np.stack([c.ravel(order="F") for c in field.components], axis=1)
    np.savetxt(path, data, fmt="%.17g", header=g.header(), comments="# ")


def read_field(path):
    with open(path) as fh:
        first = fh.readline()
    parts = first.lstrip("#").split()
    if len(parts) != 10 or parts[0] != "grid":
        raise ValueError(f"{path}: bad grid header {first.strip()!r}")
    nx, ny, nz = (int(p) for p in parts[1:4])
    lo = tuple(float(p) for p in parts[4:7])
    hi = tuple(float(p) for p in parts[7:10])
    grid = GridBox(lo, hi, (nx, ny, nz))
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape[0] != grid.size:
        raise ValueError(f"{path}: expected {grid.size} rows, found {data.shape[0]}")
    if data.shape[1] == 1:
        return ScalarFieldSample(grid, data[:, 0].reshape(grid.shape, order="F"))
    if data.shape[1] == 3:
        return VectorFieldSample(grid, np.stack([data[:, d].reshape(grid.shape, order="F") for d in range(3)]))
    raise ValueError(f"{path}: expected 1 or 3 columns")
