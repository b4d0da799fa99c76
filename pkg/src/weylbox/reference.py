"""Closed-form and semi-analytic reference spectra.

Conventions: in a constant field B0 > 0 along x3 the spin block with
sigma3 = +1, i.e. H0 - mu*hbar*B0, has the Landau levels 2k*mu*hbar*B0 (k >= 0)
and carries the zero modes; the sigma3 = -1 block has 2(k+1)*mu*hbar*B0.
For B0 < 0 the roles swap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from .errors import LambdaOutOfRange, NonpositiveField


@dataclass(frozen=True)
class LandauLadder:
    B0: float
    mu: float
    hbar: float
    favored: np.ndarray  # zero-mode block: 0, 2b, 4b, ...
    other: np.ndarray  # 2b, 4b, ...
    degeneracy_density: float  # states per unit area in each level

    @property
    def spacing(self) -> float:
        return 2.0 * self.mu * self.hbar * self.B0


def landau_pauli_levels(B0: float, mu: float, hbar: float, k_max: int) -> LandauLadder:
    if not B0 > 0:
        raise NonpositiveField(f"B0 must be positive, got {B0}")
    step = 2.0 * mu * hbar * B0
    k = np.arange(k_max + 1)
    return LandauLadder(B0, mu, hbar, step * k, step * (k + 1), mu * B0 / (2.0 * np.pi * hbar))


def landau_count(B0: float, mu: float, hbar: float, tau: float, area: float, block: str = "both") -> float:
    """Asymptotic number of 2D Pauli states below tau on a region of the given area."""
    if B0 == 0 or mu == 0:
        raise NonpositiveField("needs a nonzero field")
    lad = landau_pauli_levels(abs(B0), mu, hbar, 0)
    step = lad.spacing
    per_level = lad.degeneracy_density * area
    n_fav = int(np.ceil(tau / step)) if tau > 0 else 0
    n_oth = max(int(np.ceil(tau / step)) - 1, 0) if tau > 0 else 0
    if block == "favored":
        return n_fav * per_level
    if block == "other":
        return n_oth * per_level
    return (n_fav + n_oth) * per_level


def torus_flux(B3, T1: float, T2: float, mu: float, hbar: float) -> tuple[float, int, float]:
    """(Phi, N, defect): Phi = (1/2pi) int B over the periodic cell, N nearest integer to mu*Phi/hbar.

    ``B3`` holds samples on a periodic grid (first node at the origin, no
    repeated endpoint) so the rectangle rule is the natural quadrature.
    """
    vals = np.asarray(getattr(B3, "values", B3), dtype=float)
    if vals.ndim == 3:
        vals = vals[:, :, 0]
    phi = float(np.mean(vals)) * T1 * T2 / (2.0 * np.pi)
    q = mu * phi / hbar
    N = int(np.rint(q))
    return phi, N, float(abs(q - N))


def lemma51_window(W_const: float, N: int, T3: float, hbar: float, kappa: float, mu: float):
    """Centre (T3/(pi hbar)) W_-^(1/2) |N|, half-width |N|, and whether W_- < 2 mu hbar kappa."""
    wm = max(-W_const, 0.0)
    center = T3 / (np.pi * hbar) * np.sqrt(wm) * abs(N)
    return center, float(abs(N)), bool(wm < 2.0 * mu * hbar * kappa)


# --- square well -----------------------------------------------------------


@dataclass(frozen=True)
class WellSpec:
    c: float
    R: float
    hbar: float = 1.0

    def __post_init__(self):
        if not (self.c > 0 and self.R > 0 and self.hbar > 0):
            raise ValueError("c, R and hbar must be positive")

    @property
    def X(self) -> float:
        return self.R * np.sqrt(self.c) / self.hbar


@dataclass
class SquareWellResult:
    spec: WellSpec
    textbook_roots: np.ndarray  # lambda values (eigenvalue is -lambda), descending depth
    textbook_residuals: np.ndarray
    combined_roots: dict  # factor -> roots of the combined tangent equation
    combined_residuals: dict
    oracle: np.ndarray  # -eigenvalues of the fine discretization
    oracle_coarse: np.ndarray
    oracle_h: float
    confirmed: np.ndarray
    orders: np.ndarray
    count: int
    bound: int
    report: dict = field(default_factory=dict)


def _even(x, X):
    y = np.sqrt(max(X * X - x * x, 0.0))
    return x * np.sin(x) - y * np.cos(x)


def _odd(x, X):
    y = np.sqrt(max(X * X - x * x, 0.0))
    return x * np.cos(x) + y * np.sin(x)


def _bracketed_roots(f, lo: float, hi: float, breaks, pieces: int = 32, excl: float = 1e-12) -> list[float]:
    """Roots of f on (lo, hi) split at the given branch points, each branch scanned in pieces."""
    pts = sorted({lo, hi, *[b for b in breaks if lo < b < hi]})
    roots = []
    for a, b in zip(pts[:-1], pts[1:]):
        a2, b2 = a + excl * max(1.0, abs(a)), b - excl * max(1.0, abs(b))
        if b2 <= a2:
            continue
        grid = np.linspace(a2, b2, pieces + 1)
        vals = [f(t) for t in grid]
        for t0, t1, v0, v1 in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
            if v0 == 0.0:
                roots.append(t0)
            elif v0 * v1 < 0:
                roots.append(brentq(f, t0, t1, xtol=1e-15, rtol=1e-15, maxiter=200))
    return sorted(set(roots))


def square_well_textbook(spec: WellSpec) -> tuple[np.ndarray, np.ndarray]:
    """Bound-state depths lambda of -hbar^2 d^2 - c chi_(-R,R) from the even and odd matching conditions.

    With x = R sqrt(c-lambda)/hbar and y = R sqrt(lambda)/hbar the conditions are
    x sin x - y cos x = 0 (even) and x cos x + y sin x = 0 (odd), x^2 + y^2 = X^2.
    """
    X = spec.X
    breaks = np.arange(1, int(2 * X / np.pi) + 2) * np.pi / 2
    xs = _bracketed_roots(lambda t: _even(t, X), 0.0, X, breaks)
    xs += _bracketed_roots(lambda t: _odd(t, X), 0.0, X, breaks)
    xs = np.array(sorted(x for x in xs if 0 < x < X))
    lam = spec.c - (spec.hbar * xs / spec.R) ** 2
    res = np.array([min(abs(_even(x, X)), abs(_odd(x, X))) for x in xs])
    order = np.argsort(-lam)
    return lam[order], res[order]


def combined_equation(lam: float, spec: WellSpec, factor: float) -> float:
    """sin(theta)(c - 2 lam) - factor sqrt(lam (c - lam)) cos(theta), theta = 2R sqrt(c-lam)/hbar.

    Its zeros are those of tan(theta) = factor sqrt(lam(c-lam))/(c - 2 lam); factor 2
    is the standard combined matching condition.
    """
    c = spec.c
    th = 2.0 * spec.R * np.sqrt(max(c - lam, 0.0)) / spec.hbar
    return np.sin(th) * (c - 2.0 * lam) - factor * np.sqrt(max(lam * (c - lam), 0.0)) * np.cos(th)


def square_well_combined(spec: WellSpec, factor: float) -> tuple[np.ndarray, np.ndarray]:
    """Roots lambda in (0, c) of the combined tangent equation with the given factor."""
    c, R, hb = spec.c, spec.R, spec.hbar
    thmax = 2.0 * spec.X

    def g(th):
        lam = c - (hb * th / (2.0 * R)) ** 2
        return combined_equation(lam, spec, factor)

    breaks = np.arange(1, int(2 * thmax / np.pi) + 2) * np.pi / 2
    ths = [t for t in _bracketed_roots(g, 0.0, thmax, breaks) if 1e-9 < t < thmax * (1 - 1e-14)]
    lam = np.array([c - (hb * t / (2.0 * R)) ** 2 for t in ths])
    scale = max(c, 1.0)
    res = np.array([abs(combined_equation(l, spec, factor)) / scale for l in lam])
    order = np.argsort(-lam)
    return lam[order], res[order]


def well_oracle(spec: WellSpec, h: float, L: float) -> np.ndarray:
    """Depths of the negative eigenvalues of the tridiagonal -hbar^2 d^2 - c chi on [-L, L], Dirichlet.

    Nodes sit on +-R, where the well takes half its depth.
    """
    n_half = int(round(L / h))
    x = h * np.arange(-n_half + 1, n_half)
    pot = np.where(np.abs(x) < spec.R - 1e-9 * h, -spec.c, 0.0)
    pot[np.isclose(np.abs(x), spec.R, atol=1e-9 * h)] = -0.5 * spec.c
    t = spec.hbar**2 / h**2
    d = 2.0 * t + pot
    e = -t * np.ones(len(x) - 1)
    ev = eigh_tridiagonal(d, e, eigvals_only=True, select="v", select_range=(-spec.c - 1.0, 0.0))
    return np.sort(-ev)[::-1]


def square_well_bound(spec: WellSpec) -> int:
    return int(np.floor(2.0 * spec.R * np.sqrt(spec.c) / (np.pi * spec.hbar)))


def square_well_spectrum(spec: WellSpec, cells_per_R: int = 400, decay_lengths: float = 25.0) -> SquareWellResult:
    """Both root sets, oracle confirmation, refinement orders and the comparison report."""
    tb, tb_res = square_well_textbook(spec)
    comb = {f: square_well_combined(spec, f) for f in (2.0, 4.0)}
    bound = square_well_bound(spec)
    h = spec.R / cells_per_R
    lam_min = tb.min() if len(tb) else spec.c
    L = spec.R + decay_lengths * spec.hbar / np.sqrt(lam_min)
    L = min(L, spec.R + 2.0e5 * h)
    L = h * np.ceil(L / h)
    fine = well_oracle(spec, h / 2, L)
    coarse = well_oracle(spec, h, L)
    confirmed, orders = [], []
    for lam in tb:
        if len(fine) == 0:
            break
        i = int(np.argmin(np.abs(fine - lam)))
        ef = abs(fine[i] - lam)
        j = int(np.argmin(np.abs(coarse - lam))) if len(coarse) else None
        ec = abs(coarse[j] - lam) if j is not None else np.inf
        if ef <= 1e-3 * spec.c:
            confirmed.append(lam)
            orders.append(np.log2(ec / ef) if ef > 0 else np.inf)
    confirmed = np.array(confirmed)

    def agree(roots):
        if len(roots) != len(confirmed):
            return False
        return bool(np.allclose(np.sort(roots), np.sort(confirmed), rtol=0, atol=1e-8 * spec.c))

    report = {
        "textbook_count": int(len(tb)),
        "oracle_count": int(len(fine)),
        "confirmed_count": int(len(confirmed)),
        "factor2_count": int(len(comb[2.0][0])),
        "factor4_count": int(len(comb[4.0][0])),
        "factor2_matches_oracle": agree(comb[2.0][0]),
        "factor4_matches_oracle": agree(comb[4.0][0]),
        "bound": bound,
        "count_minus_bound": int(len(confirmed)) - bound,
    }
    return SquareWellResult(
        spec, tb, tb_res, {f: v[0] for f, v in comb.items()}, {f: v[1] for f, v in comb.items()},
        fine, coarse, h / 2, confirmed, np.array(orders), int(len(confirmed)), bound, report,
    )


# --- separable spectra ------------------------------------------------------


@dataclass(frozen=True)
class SeparableResult:
    count: int
    levels: np.ndarray  # combined values below tau (ascending)
    multiplicities: np.ndarray


def dirichlet_levels(R: float, hbar: float, tau: float) -> np.ndarray:
    """(m pi hbar / R)^2 below tau, m >= 1."""
    if tau <= 0:
        return np.zeros(0)
    m_max = int(np.floor(np.sqrt(tau) * R / (np.pi * hbar))) + 1
    eps = (np.arange(1, m_max + 1) * np.pi * hbar / R) ** 2
    return eps[eps < tau]


def separable_spectrum(levels2d, R: float, hbar: float, tau: float, degeneracies=None, levels1d=None) -> SeparableResult:
    """All sums lambda_n + eps_m below tau with multiplicities.

    ``levels1d`` overrides the continuum Dirichlet levels (for instance with the
    eigenvalues of a discretized interval).
    """
    lv = np.asarray(levels2d, dtype=float)
    deg = np.ones(len(lv), dtype=int) if degeneracies is None else np.asarray(degeneracies, dtype=int)
    top = tau - (lv.min() if len(lv) else 0.0)
    eps = dirichlet_levels(R, hbar, top) if levels1d is None else np.asarray(levels1d, dtype=float)
    sums, mult = [], []
    for e in eps[eps < tau - (lv.min() if len(lv) else 0.0)] if len(lv) else []:
        sel = lv + e < tau
        sums.append(lv[sel] + e)
        mult.append(deg[sel])
    if not sums:
        return SeparableResult(0, np.zeros(0), np.zeros(0, dtype=int))
    s, m = np.concatenate(sums), np.concatenate(mult)
    order = np.argsort(s, kind="stable")
    return SeparableResult(int(m.sum()), s[order], m[order])


def separable_count_from_counter(count2d, eps: np.ndarray, tau: float) -> int:
    """sum_m count2d(tau - eps_m), stopping at the first m with an empty 2D count."""
    total = 0
    for e in np.sort(np.asarray(eps, dtype=float)):
        c = count2d(tau - e)
        if c == 0:
            break
        total += c
    return total


def prop5_bound(c: float, R: float, field_integral: float, mu: float, hbar: float,
                lam: float | None = None, gamma: float = 0.0) -> float:
    """Cylinder bounds with unit constants.

    gamma = 0:  hbar^-3 (mu hbar + 1) sqrt(c) |log(1/lam)| R int(|B| + c)
    gamma > 0:  hbar^-3 (mu hbar + 1) c^(gamma+1/2) (|log c| + 1) R int(|B| + c)
    """
    pref = (mu * hbar + 1.0) * R * field_integral / hbar**3
    if gamma == 0:
        if lam is None or not 0.0 < lam < 1.0:
            raise LambdaOutOfRange(f"lambda must lie in (0, 1), got {lam}")
        return float(pref * np.sqrt(c) * abs(np.log(1.0 / lam)))
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    return float(pref * c ** (gamma + 0.5) * (abs(np.log(c)) + 1.0))
