"""Magnetic Weyl coefficient, its classical limit and the perturbation majorants.

For a field strength b >= 0 and potential v the Weyl density is

    beta_g * b * ( v_-^(g+1/2) + 2 * sum_{k>=1} (2kb + v)_-^(g+1/2) ),

which tends to beta_g * v_-^(g+3/2) / (g+3/2) as b -> 0.  Integrals over a
region use node weights equal to the measure of each node's dual cell inside
the region, so constant integrands are integrated exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import GammaZero, NegativeB, NegativeGamma
from .fieldlab import GridBox, ScalarFieldSample

# Above this many Landau terms for one node the sum is done with a dedicated arange.
_VECTOR_TERMS = 2000
# Break points handed to the t-quadrature of the identity check.
_MAX_KINKS = 2000


@dataclass(frozen=True)
class WeylParams:
    gamma: float = 0.0
    lam: float = 0.0
    eps_b: float = 1e-8

    def __post_init__(self):
        if self.gamma < 0:
            raise NegativeGamma(f"gamma must be >= 0, got {self.gamma}")
        if not self.eps_b > 0:
            raise ValueError("eps_b must be positive")


@dataclass(frozen=True)
class WeylResult:
    value: float
    max_landau_index: int
    nodes: int


def beta_gamma(gamma: float) -> float:
    """(1/4 pi^2) * int_0^1 t^gamma (1-t)^(-1/2) dt."""
    if gamma < 0:
        raise NegativeGamma(f"gamma must be >= 0, got {gamma}")
    val = special.beta(gamma + 1.0, 0.5)
    if not np.isfinite(val):
        val, _ = integrate.quad(lambda t: t**gamma, 0.0, 1.0, weight="alg", wvar=(0.0, -0.5))
    return float(val / (4.0 * np.pi**2))


def _landau_sums(b: np.ndarray, vm: np.ndarray, s: float) -> tuple[np.ndarray, int]:
    """sum_{k>=1} (vm - 2kb)_+^s for b > 0, exactly truncated, plus the largest k used."""
    kmax = np.floor(vm / (2.0 * b)).astype(np.int64)
    # guard against rounding that would admit a term with a negative base
    kmax = np.where(vm - 2.0 * kmax * b < 0, kmax - 1, kmax)
    kmax = np.maximum(kmax, 0)
    out = np.zeros_like(vm)
    if kmax.size == 0:
        return out, 0
    small = kmax <= _VECTOR_TERMS
    if small.any():
        bs, vs, ks = b[small], vm[small], kmax[small]
        acc = np.zeros_like(vs)
        for k in range(1, int(ks.max()) + 1):
            on = ks >= k
            acc[on] += (vs[on] - 2.0 * k * bs[on]) ** s
        out[small] = acc
    for i in np.flatnonzero(~small):
        total = 0.0
        for start in range(1, int(kmax[i]) + 1, 1 << 22):
            k = np.arange(start, min(start + (1 << 22), int(kmax[i]) + 1), dtype=float)
            total += np.sum((vm[i] - 2.0 * k * b[i]) ** s)
        out[i] = total
    return out, int(kmax.max())


def weyl_density(b, v, gamma: float = 0.0, eps_b: float = 1e-8) -> tuple[np.ndarray, int]:
    """Pointwise Weyl density for arrays (or scalars) b >= 0 and v."""
    if gamma < 0:
        raise NegativeGamma(f"gamma must be >= 0, got {gamma}")
    b, v = np.broadcast_arrays(np.asarray(b, dtype=float), np.asarray(v, dtype=float))
    shape = b.shape
    b = b.ravel()
    vm = np.maximum(-v.ravel(), 0.0)
    if np.any(b < 0):
        raise NegativeB("field strength b must be nonnegative")
    bg = beta_gamma(gamma)
    s = gamma + 0.5
    dens = np.zeros_like(vm)
    kmax = 0
    classical = (b <= eps_b) & (vm > 0)
    dens[classical] = bg * vm[classical] ** (gamma + 1.5) / (gamma + 1.5)
    quantum = (b > eps_b) & (vm > 0)
    if quantum.any():
        # identical (b, v) pairs are common (constant or piecewise fields)
        pairs, inv = np.unique(np.stack([b[quantum], vm[quantum]], axis=1), axis=0, return_inverse=True)
        sums, kmax = _landau_sums(pairs[:, 0], pairs[:, 1], s)
        vals = bg * pairs[:, 0] * (pairs[:, 1] ** s + 2.0 * sums)
        dens[quantum] = vals[inv.ravel()]
    return dens.reshape(shape), kmax


def _region_weights(grid: GridBox, region) -> np.ndarray:
    if region is None or (isinstance(region, GridBox) and region == grid):
        return grid.cell_weights()
    return grid.cell_weights(region)


def _as_values(f, grid: GridBox) -> np.ndarray:
    if isinstance(f, ScalarFieldSample):
        if f.grid != grid:
            raise ValueError("b and v must share a grid")
        return f.values
    return np.broadcast_to(np.asarray(f, dtype=float), grid.shape)


def weyl_coefficient(b, v, params: WeylParams = WeylParams(), region=None, grid: GridBox | None = None) -> WeylResult:
    """Integral of the Weyl density of (b, v + lam) over ``region``.

    ``b`` and ``v`` are ScalarFieldSamples on a common grid (or constants when
    ``grid`` is given).  ``region`` is None (the whole grid box), a GridBox or a
    tessellation.
    """
    if grid is None:
        grid = b.grid if isinstance(b, ScalarFieldSample) else v.grid
    bv = _as_values(b, grid)
    vv = _as_values(v, grid) + params.lam
    dens, kmax = weyl_density(bv, vv, params.gamma, params.eps_b)
    w = _region_weights(grid, region)
    return WeylResult(float(np.sum(w * dens)), kmax, int(np.count_nonzero(w)))


def riesz_integral_identity_check(b, v, gamma: float, region=None, grid: GridBox | None = None,
                                  eps_b: float = 1e-8, rtol: float = 1e-8) -> tuple[float, float]:
    """Direct value of the gamma-coefficient against gamma * int t^(gamma-1) B_0(b, v+t) dt."""
    if gamma <= 0:
        raise GammaZero("the integral identity needs gamma > 0")
    if grid is None:
        grid = b.grid if isinstance(b, ScalarFieldSample) else v.grid
    bv = np.asarray(_as_values(b, grid), dtype=float)
    vv = np.asarray(_as_values(v, grid), dtype=float)
    direct = weyl_coefficient(bv, vv, WeylParams(gamma, 0.0, eps_b), region, grid).value
    top = float(np.max(np.maximum(-vv, 0.0)))
    if top == 0.0:
        return 0.0, 0.0

    def count_coeff(t):
        return weyl_coefficient(bv, vv + t, WeylParams(0.0, 0.0, eps_b), region, grid).value

    # substitute s = t^gamma so that gamma t^(gamma-1) dt = ds
    kinks = set()
    pairs = np.unique(np.stack([bv.ravel(), np.maximum(-vv.ravel(), 0.0)], axis=1), axis=0)
    for bb, vm in pairs:
        kinks.add(vm)
        if bb > eps_b:
            kk = np.arange(1, int(vm / (2 * bb)) + 1)
            if len(kk) <= 200:
                kinks.update(vm - 2 * kk * bb)
        if len(kinks) > _MAX_KINKS:
            break
    pts = sorted(k**gamma for k in kinks if 0 < k < top)
    integrated, _ = integrate.quad(
        lambda s: count_coeff(s ** (1.0 / gamma)), 0.0, top**gamma,
        points=pts or None, limit=max(200, 4 * len(pts)), epsrel=rtol, epsabs=0.0,
    )
    return direct, float(integrated)


def majorants(b, U1, U2, region=None, gamma: float = 0.0, b2=None, grid: GridBox | None = None) -> dict:
    """Perturbation majorants for the Weyl coefficient, all suppressed constants equal to 1.

    M(b, U) = int b |U|^(1/2),  N(U) = int |U|^(3/2).

    potential_shift_bound  = M(b, U1-U2) + N(U1-U2)^(1/3) (N(U1-U2)^(2/3) + N(U2)^(2/3))
    field_shift_bound      = M(|b-b2|, U1) + 2 M^(1/2) N(U1)^(1/2) + M^(1/4) N(U1)^(3/4)
    clr                    = int [b + U1]_+^(3/2+gamma)

    The field shift bound compares b with ``b2`` (defaults to b, giving 0).
    """
    if grid is None:
        for f in (b, U1, U2):
            if isinstance(f, ScalarFieldSample):
                grid = f.grid
                break
    w = _region_weights(grid, region)
    bv = _as_values(b, grid)
    u1 = _as_values(U1, grid)
    u2 = _as_values(U2, grid)
    b2v = bv if b2 is None else _as_values(b2, grid)
    d = u1 - u2

    def M(bb, uu):
        return float(np.sum(w * bb * np.sqrt(np.abs(uu))))

    def N(uu):
        return float(np.sum(w * np.abs(uu) ** 1.5))

    M12, N12, N2 = M(bv, d), N(d), N(u2)
    Mb, N1 = M(np.abs(bv - b2v), u1), N(u1)
    return {
        "M12": M12,
        "N12": N12,
        "N2": N2,
        "potential_shift_bound": M12 + N12 ** (1 / 3) * (N12 ** (2 / 3) + N2 ** (2 / 3)),
        "field_shift_bound": Mb + 2.0 * np.sqrt(Mb * N1) + Mb**0.25 * N1**0.75,
        "clr": float(np.sum(w * np.maximum(bv + u1, 0.0) ** (1.5 + gamma))),
    }
