"""Eigenvalues, counting functions and Riesz means of Hermitian matrices.

Counting is done by Sylvester's law of inertia: the number of negative
pivots in a symmetric factorization of H - tau*I equals the number of
eigenvalues below tau.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    DimensionTooLarge,
    LambdaOutOfRange,
    NoConvergence,
    NumericalError,
    ShiftTooCloseToEigenvalue,
)

log = logging.getLogger(__name__)

DENSE_CAP = 4000
PIVOT_RTOL = 1e-12
SHIFT_NUDGE = 1e-9


@dataclass(frozen=True, eq=False)
class SparseHermitian:
    """An assembled Hermitian matrix together with a little provenance."""

    matrix: sp.csr_matrix
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def hermitian_defect(self) -> float:
        d = self.matrix - self.matrix.conj().T
        return float(abs(d).max()) if d.nnz else 0.0

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


@dataclass(frozen=True)
class CountResult:
    tau: float
    count: int
    method: str
    shift_used: float | None = None


@dataclass(frozen=True)
class RieszResult:
    gamma: float
    lam: float
    value: float
    contributing: int


def _as_matrix(H):
    if isinstance(H, SparseHermitian):
        return H.matrix
    if sp.issparse(H):
        return H
    return np.asarray(H)


def matrix_norm(H) -> float:
    """Max absolute row sum, an upper bound for the spectral norm."""
    A = _as_matrix(H)
    if sp.issparse(A):
        return float(abs(A).sum(axis=1).max()) if A.nnz else 0.0
    return float(np.abs(A).sum(axis=1).max()) if A.size else 0.0


def eigen_dense(H, cap: int = DENSE_CAP) -> np.ndarray:
    A = _as_matrix(H)
    n = A.shape[0]
    if n > cap:
        raise DimensionTooLarge(f"dimension {n} exceeds the dense cap {cap}")
    if sp.issparse(A):
        A = A.toarray()
    return sla.eigvalsh(A)


def _dense_inertia(A: np.ndarray, tau: float) -> tuple[int, float]:
    M = A - tau * np.eye(A.shape[0], dtype=A.dtype)
    _, D, _ = sla.ldl(M, lower=True, hermitian=True)
    n = D.shape[0]
    neg = 0
    smallest = np.inf
    i = 0
    while i < n:
        if i + 1 < n and D[i + 1, i] != 0:
            ev = np.linalg.eigvalsh(D[i : i + 2, i : i + 2])
            neg += int(np.sum(ev < 0))
            smallest = min(smallest, float(np.min(np.abs(ev))))
            i += 2
        else:
            d = D[i, i].real
            neg += int(d < 0)
            smallest = min(smallest, abs(d))
            i += 1
    return neg, smallest


def _sparse_inertia(A, tau: float) -> tuple[int, float]:
    n = A.shape[0]
    M = (A - tau * sp.identity(n, dtype=A.dtype, format="csc")).tocsc()
    lu = spla.splu(
        M,
        permc_spec="MMD_AT_PLUS_A",
        diag_pivot_thresh=0.0,
        options=dict(SymmetricMode=True),
    )
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise NumericalError("sparse factorization pivoted off the diagonal")
    d = lu.U.diagonal()
    return int(np.sum(d.real < 0)), float(np.min(np.abs(d))) if n else np.inf


def _use_dense(A) -> bool:
    n = A.shape[0]
    if not sp.issparse(A):
        return True
    return n <= 200 or A.nnz > 0.2 * n * n


def count_below(H, tau: float, method: str = "auto") -> CountResult:
    """Number of eigenvalues of H strictly below tau, from the inertia of H - tau*I."""
    A = _as_matrix(H)
    n = A.shape[0]
    if n == 0:
        return CountResult(float(tau), 0, "inertia")
    norm = max(matrix_norm(A), abs(tau), 1.0)
    dense = method == "dense" or (method == "auto" and _use_dense(A))

    def attempt(t):
        if dense:
            B = A.toarray() if sp.issparse(A) else A
            return _dense_inertia(B, t)
        try:
            return _sparse_inertia(A, t)
        except (NumericalError, RuntimeError):
            if n <= DENSE_CAP:
                return _dense_inertia(A.toarray(), t)
            raise

    label = "dense" if dense else "inertia"
    nudge = SHIFT_NUDGE * max(abs(tau), 1.0)
    t = float(tau)
    for retry in range(2):
        neg, smallest = attempt(t)
        if smallest > PIVOT_RTOL * norm:
            return CountResult(float(tau), neg, label, None if retry == 0 else t)
        log.debug("tiny pivot %.3e at shift %r, nudging", smallest, t)
        t = float(tau) + nudge
    raise ShiftTooCloseToEigenvalue(float(tau), nudge)


def riesz_sum(eigs: np.ndarray, gamma: float, lam: float = 0.0) -> tuple[float, int]:
    """sum over eigenvalues e < -lam of |e + lam|^gamma (a count when gamma = 0)."""
    x = np.asarray(eigs, dtype=float) + lam
    neg = x[x < 0]
    if gamma == 0:
        return float(len(neg)), len(neg)
    return float(np.sum((-neg) ** gamma)), len(neg)


def _lower_bound(A) -> float:
    """Gershgorin lower bound of the spectrum."""
    if sp.issparse(A):
        diag = A.diagonal().real
        off = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(diag)
    else:
        diag = np.diag(A).real
        off = np.abs(A).sum(axis=1) - np.abs(diag)
    return float(np.min(diag - off)) if len(diag) else 0.0


def riesz_mean(H, gamma: float, lam: float = 0.0, cap: int = DENSE_CAP) -> RieszResult:
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    A = _as_matrix(H)
    if gamma == 0:
        c = count_below(A, -lam).count
        return RieszResult(gamma, lam, float(c), c)
    if A.shape[0] <= cap:
        eigs = eigen_dense(A, cap)
    else:
        lo = _lower_bound(A) - 1.0
        k = count_below(A, -lam).count
        if k == 0:
            return RieszResult(gamma, lam, 0.0, 0)
        eigs = eigen_window(A, 0.5 * (lo - lam), 0.5 * (-lam - lo), max_count=k + 8)
    value, m = riesz_sum(eigs, gamma, lam)
    return RieszResult(gamma, lam, value, m)


def riesz_from_counts(count: Callable[[float], int], gamma: float, t_max: float, rtol: float = 1e-4) -> float:
    """gamma * int_0^t_max t^(gamma-1) count(t) dt for a nonincreasing integer step function.

    Works in s = t^gamma, where the integral is int count ds.  Intervals whose
    end counts agree are integrated exactly; the others are bisected until
    their s-width falls below rtol * s_max / count(0), then the trapezoid
    value is used.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if t_max <= 0:
        return 0.0
    s_max = t_max**gamma
    c0 = count(0.0)
    if c0 == 0:
        return 0.0
    cache: dict[float, int] = {0.0: c0}

    def N(s):
        if s not in cache:
            cache[s] = count(s ** (1.0 / gamma))
        return cache[s]

    width = rtol * s_max / max(c0, 1)
    total = 0.0
    stack = [(0.0, s_max)]
    while stack:
        a, b = stack.pop()
        na, nb = N(a), N(b)
        if na == nb:
            total += na * (b - a)
        elif b - a <= width:
            total += 0.5 * (na + nb) * (b - a)
        else:
            m = 0.5 * (a + b)
            stack.append((m, b))
            stack.append((a, m))
    return float(total)


def eigen_window(H, center: float, radius: float, max_count: int = 200, tol: float = 1e-10) -> np.ndarray:
    """Eigenvalues in [center - radius, center + radius] by shift-invert Lanczos.

    The number expected is fixed beforehand by two inertia counts, so missing
    or spurious values are detected rather than silently returned.
    """
    A = _as_matrix(H)
    n = A.shape[0]
    lo, hi = center - radius, center + radius
    expected = count_below(A, np.nextafter(hi, np.inf)).count - count_below(A, lo).count
    if expected <= 0:
        return np.zeros(0)
    if expected > max_count:
        raise NoConvergence(0, f"window holds {expected} eigenvalues, more than max_count={max_count}")
    k = expected + 2
    if k >= n - 1 or n <= 300:
        ev = eigen_dense(A)
        return ev[(ev >= lo) & (ev <= hi)]
    norm = max(matrix_norm(A), 1.0)
    Asp = sp.csc_matrix(A)
    sigma = center + 1e-7 * radius
    for attempt in range(3):
        try:
            vals, vecs = spla.eigsh(Asp, k=k, sigma=sigma, which="LM", tol=tol * 1e-2, maxiter=20 * n)
        except spla.ArpackNoConvergence as exc:
            raise NoConvergence(20 * n, str(exc)) from exc
        res = np.linalg.norm(Asp @ vecs - vecs * vals, axis=0)
        if np.any(res > tol * norm):
            raise NoConvergence(20 * n, f"residual {res.max():.2e} above {tol * norm:.2e}")
        inside = np.sort(vals[(vals >= lo) & (vals <= hi)])
        if len(inside) == expected:
            return inside
        k = min(2 * k, n - 2)
    raise NoConvergence(3, f"found {len(inside)} eigenvalues, inertia says {expected}")


def dirac_gap_count(D, lam: float) -> CountResult:
    """Number of eigenvalues of D in (-sqrt(1-lam), sqrt(1-lam)) via the inertia of D^2 - (1-lam)."""
    if not 0.0 < lam < 1.0:
        raise LambdaOutOfRange(f"lambda must lie in (0, 1), got {lam}")
    if not isinstance(D, (SparseHermitian, np.ndarray)) and not sp.issparse(D):
        from .magop import assemble

        D = assemble(D)
    A = _as_matrix(D)
    A = sp.csr_matrix(A)
    S = (A @ A).tocsr()
    S = 0.5 * (S + S.conj().T)
    r = count_below(S - (1.0 - lam) * sp.identity(A.shape[0], format="csr"), 0.0)
    return CountResult(float(lam), r.count, r.method, r.shift_used)


def combined_gap_count(spec, lam: float) -> float:
    """Average of the gap counts for potential V and -V."""
    from dataclasses import replace

    from .magop import assemble

    plus = dirac_gap_count(assemble(spec), lam).count
    minus = dirac_gap_count(assemble(replace(spec, potential=-spec.potential)), lam).count
    return 0.5 * (plus + minus)
