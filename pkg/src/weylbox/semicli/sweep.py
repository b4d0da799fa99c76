"""Semiclassical sweeps: counts and Riesz means against the magnetic Weyl coefficient.

Separable path (Pauli only): when B = (0, 0, B3(x1, x2)) and W = W(x1, x2) on
the box Omega2 x (z0, z1), the Dirichlet spectrum is {lambda_n + eps_m} with
lambda_n from the two spin blocks of the 2D Pauli operator and eps_m the 1D
Dirichlet levels on (z0, z1).  Counting needs only 2D factorizations.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from ..errors import ValidationError
from ..fieldlab import GridBox, ScalarFieldSample, VectorFieldSample
from ..magop import OperatorSpec, assemble, spin_blocks
from ..reference import dirichlet_levels
from ..speccount import DENSE_CAP, count_below, dirac_gap_count, eigen_dense, riesz_from_counts, riesz_mean
from ..weylcoeff import WeylParams, weyl_coefficient
from .config import ExperimentConfig
from .expr import Num, Var, Vec

log = logging.getLogger(__name__)

GAP_EPS = 1e-12


@dataclass(frozen=True)
class SweepRow:
    hbar: float
    mu: float
    gamma: float
    lam: float
    count: float
    riesz: float
    scaled: float
    target: float
    gap: float
    wall_time: float
    error: str = ""

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict:
        return {c: getattr(self, c) for c in self.columns()}


def relative_gap(scaled: float, target: float, eps: float = GAP_EPS) -> float:
    return abs(scaled - target) / max(target, eps)


def _uses(node, name: str) -> bool:
    if isinstance(node, Var):
        return node.name == name
    for attr in ("arg", "left", "right"):
        if hasattr(node, attr) and _uses(getattr(node, attr), name):
            return True
    if isinstance(node, Vec):
        return any(_uses(n, name) for n in node.items)
    return False


def _is_zero(node) -> bool:
    return isinstance(node, Num) and node.value == 0.0


def check_separable(cfg: ExperimentConfig) -> None:
    items = cfg.B.tree.items
    if not (_is_zero(items[0]) and _is_zero(items[1])):
        raise ValidationError("fields.B", "the separable path needs B = (0, 0, B3)")
    if _uses(items[2], "x3") or _uses(cfg.W.tree, "x3"):
        raise ValidationError("fields", "the separable path needs B3 and W independent of x3")


def grid2d(cfg: ExperimentConfig) -> GridBox:
    lo, hi, n = cfg.lower, cfg.upper, cfg.points2d
    return GridBox((lo[0], lo[1], 0.0), (hi[0], hi[1], 0.0), (n, n, 1))


def grid3d(cfg: ExperimentConfig) -> GridBox:
    return GridBox(cfg.lower, cfg.upper, cfg.points)


def z_levels(cfg: ExperimentConfig, hbar: float, top: float) -> np.ndarray:
    """1D Dirichlet levels on (z0, z1) below ``top``: discrete when points_z > 0, else continuum."""
    R = cfg.upper[2] - cfg.lower[2]
    if cfg.points_z <= 0:
        return dirichlet_levels(R, hbar, top)
    n = cfg.points_z - 1
    h = R / n
    m = np.arange(1, n)
    eps = 2.0 * hbar**2 / h**2 * (1.0 - np.cos(m * np.pi / n))
    return eps[eps < top]


def _fields(cfg: ExperimentConfig, grid: GridBox):
    X = grid.mesh()
    B = VectorFieldSample(grid, np.stack(cfg.B(*X)))
    W = ScalarFieldSample(grid, cfg.W(*X))
    return B, W


class _Separable:
    """Spin blocks of the 2D Pauli operator plus 1D levels; counts by inertia."""

    def __init__(self, cfg: ExperimentConfig, hbar: float, mu: float):
        check_separable(cfg)
        self.cfg, self.hbar, self.mu = cfg, hbar, mu
        g = grid2d(cfg)
        self.grid = g
        self.B, self.W = _fields(cfg, g)
        spec = OperatorSpec("pauli", hbar, g, mu, B=self.B, potential=self.W)
        self.blocks = spin_blocks(assemble(spec))
        self.R = cfg.upper[2] - cfg.lower[2]

    def count(self, tau: float) -> int:
        total = 0
        for e in z_levels(self.cfg, self.hbar, tau - self._floor()):
            c = sum(count_below(b, tau - e).count for b in self.blocks)
            if c == 0:
                break
            total += c
        return total

    def _floor(self) -> float:
        if not hasattr(self, "_lb"):
            lbs = []
            for b in self.blocks:
                d = b.diagonal().real
                off = np.asarray(abs(b).sum(axis=1)).ravel() - np.abs(d)
                lbs.append(float(np.min(d - off)))
            self._lb = min(lbs)
        return self._lb

    def riesz(self, gamma: float, lam: float) -> tuple[float, float]:
        N = float(self.count(-lam))
        if gamma == 0 or N == 0:
            return N, N
        if all(b.shape[0] <= DENSE_CAP for b in self.blocks):
            eps = z_levels(self.cfg, self.hbar, -lam - self._floor())
            ev = np.concatenate([eigen_dense(b) for b in self.blocks])
            ev = ev[ev < -lam - (eps[0] if len(eps) else np.inf)]
            sums = (ev[:, None] + eps[None, :] + lam).ravel()
            return N, float(np.sum((-sums[sums < 0]) ** gamma))
        t_max = max(-lam - self._floor(), 0.0)
        return N, riesz_from_counts(lambda t: self.count(-lam - t), gamma, t_max)

    def target(self, gamma: float, lam: float) -> float:
        b = self.mu * self.hbar * self.B.norm().values
        return self.R * weyl_coefficient(b, self.W.values, WeylParams(gamma, lam), grid=self.grid).value


class _Full:
    def __init__(self, cfg: ExperimentConfig, hbar: float, mu: float):
        self.cfg, self.hbar, self.mu = cfg, hbar, mu
        g = grid3d(cfg)
        self.grid = g
        self.B, self.W = _fields(cfg, g)
        kind = cfg.kind
        self.spec = OperatorSpec(kind, hbar, g, mu, B=self.B, potential=self.W, wilson=cfg.wilson)
        self.H = assemble(self.spec) if kind != "dirac" else None

    def riesz(self, gamma: float, lam: float) -> tuple[float, float]:
        if self.cfg.kind == "dirac":
            from dataclasses import replace

            plus = dirac_gap_count(assemble(self.spec), lam).count
            minus = dirac_gap_count(assemble(replace(self.spec, potential=-self.W)), lam).count
            N = 0.5 * (plus + minus)
            return N, N
        N = float(count_below(self.H, -lam).count)
        if gamma == 0:
            return N, N
        return N, riesz_mean(self.H, gamma, lam).value

    def target(self, gamma: float, lam: float) -> float:
        b = self.mu * self.hbar * self.B.norm().values
        if self.cfg.kind == "schrodinger":
            b = np.zeros_like(b)
        if self.cfg.kind == "dirac":
            V = np.abs(self.W.values)
            return weyl_coefficient(b, -(2.0 * V + V**2), WeylParams(gamma, 0.0), grid=self.grid).value
        return weyl_coefficient(b, self.W.values, WeylParams(gamma, lam), grid=self.grid).value


def _run_group(cfg: ExperimentConfig, hbar: float, mu: float) -> list[SweepRow]:
    rows = []
    t0 = time.perf_counter()
    try:
        model = (_Separable if cfg.path == "separable" else _Full)(cfg, hbar, mu)
        err = ""
    except Exception as exc:  # recorded, the sweep goes on
        model, err = None, f"{type(exc).__name__}: {exc}"
    pref = hbar**3 / (mu * hbar + 1.0) if cfg.normalized else hbar**3
    for gamma in cfg.gamma:
        for lam in cfg.lam:
            if model is None:
                nan = float("nan")
                rows.append(SweepRow(hbar, mu, gamma, lam, nan, nan, nan, nan, nan, time.perf_counter() - t0, err))
                t0 = time.perf_counter()
                continue
            try:
                N, M = model.riesz(gamma, lam)
                target = model.target(gamma, lam)
                if cfg.normalized:
                    target = target / (mu * hbar + 1.0)
                scaled = pref * M
                rows.append(SweepRow(hbar, mu, gamma, lam, N, M, scaled, target, relative_gap(scaled, target),
                                     time.perf_counter() - t0))
            except Exception as exc:
                nan = float("nan")
                rows.append(SweepRow(hbar, mu, gamma, lam, nan, nan, nan, nan, nan, time.perf_counter() - t0,
                                     f"{type(exc).__name__}: {exc}"))
            t0 = time.perf_counter()
    return rows


def run_sweep(cfg: ExperimentConfig, threads: int = 1) -> list[SweepRow]:
    """All sweep rows in config order (hbar, then mu, gamma, lambda)."""
    groups = [(h, mu) for h in cfg.hbar for mu in cfg.mus(h)]
    if threads <= 1:
        parts = [_run_group(cfg, h, mu) for h, mu in groups]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda g: _run_group(cfg, *g), groups))
    return [row for part in parts for row in part]
