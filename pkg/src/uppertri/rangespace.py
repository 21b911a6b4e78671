"""Range spaces, range equality and Douglas constants for finite matrices.

Rank decisions use the same relative tolerance as ``core.psd_check``,
applied to the eigenvalues of AA*.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import PSD_TOL, Window, as_matrix, pattern_nest_tensor, psd_check
from .factor import (
    FactorResult,
    hotel_factor,
    nest_tensor_pattern_for,
    poset_feasibility,
    verify_factor,
)


class RangeMismatch(ValueError):
    pass


def _range_basis(A: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    ev, V = np.linalg.eigh(A @ A.conj().T)
    lmax = ev[-1] if ev.size else 0.0
    if lmax <= 0:
        return V[:, :0]
    return V[:, ev > tol * lmax]


def projector(A, tol: float = PSD_TOL) -> np.ndarray:
    V = _range_basis(as_matrix(A), tol)
    return V @ V.conj().T


class RangeSpace:
    """Ran B with the norm ||y|| = ||x||, x the preimage orthogonal to ker B."""

    def __init__(self, B, tol: float = PSD_TOL):
        self.B = as_matrix(B)
        self.basis = _range_basis(self.B, tol)
        self.rank = self.basis.shape[1]
        self._pinv = np.linalg.pinv(self.B, rcond=math.sqrt(tol))

    def contains(self, y, tol: float = 1e-8) -> bool:
        y = np.asarray(y, dtype=complex)
        r = y - self.basis @ (self.basis.conj().T @ y)
        return bool(np.linalg.norm(r) <= tol * (1 + np.linalg.norm(y)))

    def preimage(self, y) -> np.ndarray:
        return self._pinv @ np.asarray(y, dtype=complex)

    def norm(self, y) -> float:
        if not self.contains(y):
            raise ValueError("vector is not in the range")
        return float(np.linalg.norm(self.preimage(y)))


def range_contained(A, C, tol: float = 1e-8) -> bool:
    """Ran A inside Ran C, via ||(I - P_C) P_A|| <= tol."""
    PA, PC = projector(A), projector(C)
    return bool(np.linalg.norm(PA - PC @ PA, 2) <= tol)


def range_equal(A, C, tol: float = 1e-8) -> bool:
    A, C = as_matrix(A), as_matrix(C)
    if A.shape[0] != C.shape[0]:
        raise ValueError("range_equal needs the same number of rows")
    return bool(np.linalg.norm(projector(A) - projector(C), 2) <= tol)


def _pencil_max(A: np.ndarray, C: np.ndarray, tol: float) -> float:
    """Smallest lam with AA* <= lam CC*, or inf when Ran A escapes Ran C."""
    if not range_contained(A, C, tol):
        return math.inf
    ev, V = np.linalg.eigh(C @ C.conj().T)
    lmax = ev[-1] if ev.size else 0.0
    keep = ev > PSD_TOL * lmax if lmax > 0 else np.zeros(ev.shape, bool)
    if not keep.any():
        return 0.0
    S = V[:, keep] / np.sqrt(ev[keep])
    M = S.conj().T @ A
    return float(max(np.linalg.eigvalsh(M @ M.conj().T)[-1], 0.0))


@dataclass
class DouglasConstants:
    lam: float
    mu: float


def douglas_constants(A, C, tol: float = 1e-8) -> DouglasConstants:
    """Minimal lam, mu with AA* <= lam CC* and CC* <= mu AA*.

    Infinite constants are returned as ``math.inf``.
    """
    A, C = as_matrix(A), as_matrix(C)
    return DouglasConstants(_pencil_max(A, C, tol), _pencil_max(C, A, tol))


@dataclass
class TensorNestResult:
    factor: FactorResult
    path: str
    certificate: list


def tensornest_demo(A, rows: Window, C=None, extra_cols: int | None = None) -> TensorNestResult:
    """Factor AA* = BB* with B admissible for the nest-tensor pattern.

    When no C is supplied, C = I is used, which requires AA* invertible.
    Tries the square reverse Cholesky factor first; if its zero pattern is
    wrong (or AA* is singular) the factor is pushed into augmented columns.
    """
    A = as_matrix(A)
    Q = A @ A.conj().T
    Q = (Q + Q.conj().T) / 2
    n = Q.shape[0]
    chk = psd_check(Q)
    if C is None:
        if chk.rank < n:
            raise RangeMismatch("AA* is singular; supply a pattern-supported C with the same range")
        C = np.eye(n)
    if not range_equal(A, C):
        raise RangeMismatch("Ran A differs from Ran C")
    cert = []
    if chk.rank == n:
        rep = poset_feasibility(Q, pattern_nest_tensor(rows.d, rows))
        if rep.feasible:
            U = rep.factor
            res = verify_factor(U, Q)
            return TensorNestResult(FactorResult(U, res.residual_fro, n, True), "poset", [])
        cert = rep.certificate
    extra = chk.rank if extra_cols is None else extra_cols
    B = hotel_factor(Q, rows, extra)
    check = verify_factor(B.factor, Q, nest_tensor_pattern_for(B.factor, rows))
    if not check.ok:
        raise AssertionError("augmented factor failed verification")
    return TensorNestResult(B, "hotel", cert)
