"""Cholesky, reverse Cholesky, pattern feasibility and column augmentation.

All factors are returned in canonical gauge: diagonal entries real and >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    IndefiniteError,
    NotHermitianError,
    Pattern,
    SingularError,
    Window,
    as_matrix,
    is_hermitian,
    pattern_nest_tensor,
    psd_check,
    universal_columns,
)

PIVOT_TOL = 1e-12
ZERO_TOL = 1e-8
VERIFY_TOL = 1e-10


@dataclass
class FactorResult:
    factor: np.ndarray
    residual_fro: float
    rank: int
    canonical: bool
    # column labels for rectangular (augmented) factors; None means "same as rows"
    col_indices: list | None = None


@dataclass
class FeasibilityReport:
    feasible: bool
    factor: np.ndarray | None
    certificate: list = field(default_factory=list)
    certificate_indices: list = field(default_factory=list)


@dataclass
class VerifyReport:
    ok: bool
    residual_fro: float
    pattern_violations: list = field(default_factory=list)


def _residual(B: np.ndarray, Q: np.ndarray) -> float:
    return float(np.linalg.norm(B @ B.conj().T - Q))


def _is_canonical(F: np.ndarray) -> bool:
    dg = np.diagonal(F)
    scale = max(1.0, float(np.abs(F).max())) if F.size else 1.0
    return bool(np.all(np.abs(dg.imag) <= 1e-14 * scale) and np.all(dg.real >= 0))


def cholesky_ll(R, pivot_tol: float = PIVOT_TOL) -> FactorResult:
    """Lower-triangular L with LL* = R, tolerating semidefinite input.

    A pivot with |pivot| <= pivot_tol * max diagonal is treated as zero and
    leaves a zero column; a pivot below that threshold on the negative side
    means R is indefinite.
    """
    R = as_matrix(R)
    n = R.shape[0]
    if R.shape != (n, n):
        raise ValueError(f"cholesky_ll needs a square matrix, got {R.shape}")
    if not is_hermitian(R):
        raise NotHermitianError("cholesky_ll: input is not hermitian")
    A = R.copy()
    L = np.zeros_like(A)
    maxdiag = float(np.max(R.diagonal().real)) if n else 0.0
    thresh = pivot_tol * max(maxdiag, 0.0)
    rank = 0
    for k in range(n):
        pivot = A[k, k].real
        if abs(pivot) <= thresh:
            continue
        if pivot < 0:
            raise IndefiniteError(f"negative pivot {pivot:.3e} at position {k}")
        root = np.sqrt(pivot)
        col = A[k + 1:, k] / root
        L[k, k] = root
        L[k + 1:, k] = col
        A[k + 1:, k + 1:] -= np.outer(col, col.conj())
        rank += 1
    return FactorResult(L, _residual(L, R), rank, _is_canonical(L))


def _flip(M: np.ndarray) -> np.ndarray:
    return M[::-1, ::-1]


def reverse_cholesky(R, pivot_tol: float = PIVOT_TOL) -> FactorResult:
    """Upper-triangular U with UU* = R, eliminating from the last entry."""
    R = as_matrix(R)
    res = cholesky_ll(_flip(R), pivot_tol)
    U = np.ascontiguousarray(_flip(res.factor))
    return FactorResult(U, _residual(U, R), res.rank, res.canonical)


def _positions_off_pattern(B: np.ndarray, pat: Pattern, tol: float) -> list:
    mask = pat.mask()
    if mask.shape != B.shape:
        raise ValueError(f"pattern shape {mask.shape} does not match factor {B.shape}")
    big = np.abs(B) > tol
    bad = np.argwhere(big & ~mask)
    return [(int(i), int(j)) for i, j in bad]


def poset_feasibility(Q, pat: Pattern, zero_tol: float = ZERO_TOL) -> FeasibilityReport:
    """Decide whether invertible Q = BB* has a solution B supported on ``pat``.

    Any such B is an invertible upper-triangular factor, so it equals the
    canonical reverse Cholesky factor up to a diagonal unitary and shares its
    zero pattern. The certificate lists 1-based positions where U is nonzero
    but the pattern forbids an entry.
    """
    Q = as_matrix(Q)
    n = Q.shape[0]
    if len(pat.rows) != n or len(pat.cols) != n:
        raise ValueError("pattern must be square and match Q")
    if not pat.is_upper() or not all(pat.allowed(I, I) for I in pat.rows):
        raise ValueError("pattern must be upper triangular and contain the diagonal")
    chk = psd_check(Q)
    if not chk.is_psd:
        raise IndefiniteError("poset_feasibility: Q is not positive semidefinite")
    if chk.rank < n:
        raise SingularError("poset_feasibility only decides invertible Q")
    U = reverse_cholesky(Q).factor
    tol = zero_tol * float(np.abs(U).max())
    bad = _positions_off_pattern(U, pat, tol)
    cert = [(i + 1, j + 1) for i, j in bad]
    cert_idx = [(pat.rows[i], pat.cols[j]) for i, j in bad]
    return FeasibilityReport(not bad, U if not bad else None, cert, cert_idx)


def _low_rank_factor(Q: np.ndarray, rank: int) -> np.ndarray:
    ev, V = np.linalg.eigh(Q)
    keep = np.argsort(ev)[::-1][:rank]
    return V[:, keep] * np.sqrt(np.clip(ev[keep], 0.0, None))


def hotel_factor(Q, rows: Window, extra_cols: int) -> FactorResult:
    """Rectangular factor of Q living entirely in augmented columns.

    Columns are the window indices followed by ``extra_cols`` lattice points
    that dominate the whole window, so every entry is admissible for the
    nest-tensor pattern. The window columns stay zero.
    """
    Q = as_matrix(Q)
    n = Q.shape[0]
    if n != len(rows):
        raise ValueError(f"Q has {n} rows but window has {len(rows)} indices")
    chk = psd_check(Q)
    if not chk.is_psd:
        raise IndefiniteError("hotel_factor: Q is not positive semidefinite")
    if extra_cols < chk.rank:
        raise ValueError(f"extra_cols={extra_cols} is below rank(Q)={chk.rank}")
    U = reverse_cholesky(Q).factor
    nonzero = np.flatnonzero(np.abs(U).max(axis=0) > 0) if n else np.array([], int)
    F = U[:, nonzero]
    if F.shape[1] > extra_cols or _residual(F, Q) > VERIFY_TOL * (1 + np.linalg.norm(Q)):
        F = _low_rank_factor(Q, chk.rank)
    B = np.zeros((n, n + extra_cols), dtype=complex)
    B[:, n:n + F.shape[1]] = F
    cols = rows.indices() + universal_columns(rows, extra_cols)
    return FactorResult(B, _residual(B, Q), chk.rank, True, cols)


def verify_factor(B, Q, pat: Pattern | None = None, tol: float = VERIFY_TOL,
                  zero_tol: float = ZERO_TOL) -> VerifyReport:
    B, Q = as_matrix(B), as_matrix(Q)
    if B.shape[0] != Q.shape[0] or Q.shape[0] != Q.shape[1]:
        raise ValueError(f"incompatible shapes {B.shape} and {Q.shape}")
    res = _residual(B, Q)
    violations = []
    if pat is not None and B.size:
        violations = [(i + 1, j + 1) for i, j in
                      _positions_off_pattern(B, pat, zero_tol * float(np.abs(B).max()))]
    ok = res <= tol * (1 + float(np.linalg.norm(Q))) and not violations
    return VerifyReport(bool(ok), res, violations)


def nest_tensor_pattern_for(B: np.ndarray, rows: Window) -> Pattern:
    """Nest-tensor pattern for a factor whose extra columns are universal."""
    extra = B.shape[1] - len(rows)
    if extra < 0:
        raise ValueError("factor has fewer columns than the window")
    return pattern_nest_tensor(rows.d, rows, rows.indices() + universal_columns(rows, extra))


def counterexample_matrix() -> tuple:
    """The 4x4 instance Q = (I + E_23)(I + E_23)* on the d=2, n=1 window."""
    U = np.eye(4, dtype=complex)
    U[1, 2] = 1.0
    return U @ U.conj().T, U
