"""Multi-indices, windows, patterns, PSD checks and the JSON matrix format.

Multi-indices are plain tuples of nonnegative ints. Dense matrices are
``numpy`` complex128 arrays; nothing here wraps them.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from math import comb
from typing import Callable, Iterable, Sequence

import numpy as np

MultiIndex = tuple

HERM_TOL = 1e-12
PSD_TOL = 1e-10


class DimensionMismatch(ValueError):
    pass


class NotHermitianError(ValueError):
    pass


class IndefiniteError(ValueError):
    pass


class SingularError(ValueError):
    pass


def _check_dims(I: Sequence[int], J: Sequence[int]) -> None:
    if len(I) != len(J):
        raise DimensionMismatch(f"multi-indices of different length: {I} vs {J}")


def leq(I: Sequence[int], J: Sequence[int]) -> bool:
    """Componentwise order: every coordinate of I is at most that of J."""
    _check_dims(I, J)
    return all(i <= j for i, j in zip(I, J))


def degree(I: Sequence[int]) -> int:
    return sum(I)


def factorial(I: Sequence[int]) -> int:
    """J! = j_1! * ... * j_d!"""
    out = 1
    for i in I:
        out *= math.factorial(i)
    return out


def graded_lex_key(I: Sequence[int]) -> tuple:
    return (sum(I), tuple(I))


def graded_lex_rank(I: Sequence[int]) -> int:
    """Position of I in the graded-lex enumeration of all of N_0^d."""
    d = len(I)
    s = sum(I)
    # indices of strictly smaller total degree
    rank = comb(s - 1 + d, d) if s > 0 else 0
    remaining = s
    for k, ik in enumerate(I):
        parts = d - k - 1
        for v in range(ik):
            rem = remaining - v
            if parts == 0:
                rank += 1 if rem == 0 else 0
            else:
                rank += comb(rem + parts - 1, parts - 1)
        remaining -= ik
    return rank


def validate_index(I: Sequence[int]) -> MultiIndex:
    I = tuple(int(i) for i in I)
    if len(I) < 1 or any(i < 0 for i in I):
        raise ValueError(f"invalid multi-index {I}")
    return I


@dataclass(frozen=True)
class Window:
    """Box {I : every coordinate <= n} in N_0^d, ordered graded-lex."""

    d: int
    n: int

    def __post_init__(self):
        if self.d < 1 or self.n < 0:
            raise ValueError(f"bad window d={self.d}, n={self.n}")

    def __len__(self) -> int:
        return (self.n + 1) ** self.d

    def __contains__(self, I) -> bool:
        return len(I) == self.d and all(0 <= i <= self.n for i in I)

    def indices(self) -> list:
        return window_enumerate(self)

    def positions(self) -> dict:
        return {I: p for p, I in enumerate(self.indices())}


def window_enumerate(w: Window) -> list:
    box = itertools.product(range(w.n + 1), repeat=w.d)
    return sorted(box, key=graded_lex_key)


@dataclass
class Pattern:
    """Admissible (row, column) pairs for a factor.

    ``allowed`` defaults to the nest-tensor predicate I <= K componentwise.
    """

    rows: list
    cols: list
    allowed: Callable = leq

    def mask(self) -> np.ndarray:
        return np.array([[bool(self.allowed(I, K)) for K in self.cols] for I in self.rows])

    def is_upper(self) -> bool:
        """True when the square part of the pattern sits on or above the diagonal."""
        m = self.mask()
        k = min(m.shape)
        return not np.any(np.tril(m[:k, :k], -1))


def pattern_nest_tensor(d: int, rows: Window, cols: Iterable | None = None) -> Pattern:
    row_idx = rows.indices()
    col_idx = row_idx if cols is None else [validate_index(K) for K in cols]
    if any(len(K) != d for K in col_idx) or rows.d != d:
        raise DimensionMismatch("pattern dimension does not match window")
    return Pattern(row_idx, col_idx, leq)


def universal_columns(w: Window, count: int) -> list:
    """Lattice points (n+1+t, n+1, ..., n+1) that dominate every index of ``w``."""
    top = w.n + 1
    return [(top + t,) + (top,) * (w.d - 1) for t in range(count)]


def herm_threshold(M: np.ndarray, herm_tol: float = HERM_TOL) -> float:
    return herm_tol * (1.0 + (np.abs(M).max() if M.size else 0.0))


def is_hermitian(M: np.ndarray, herm_tol: float = HERM_TOL) -> bool:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    if M.size == 0:
        return True
    return np.abs(M - M.conj().T).max() <= herm_threshold(M, herm_tol)


@dataclass(frozen=True)
class PsdResult:
    is_psd: bool
    rank: int
    min_eig: float
    max_eig: float = field(default=0.0)


def psd_check(M, tol: float = PSD_TOL, herm_tol: float = HERM_TOL) -> PsdResult:
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"psd_check needs a square matrix, got {M.shape}")
    if not is_hermitian(M, herm_tol):
        raise NotHermitianError("psd_check: input is not hermitian")
    if M.size == 0:
        return PsdResult(True, 0, 0.0, 0.0)
    ev = np.linalg.eigvalsh(M)
    lmin, lmax = float(ev[0]), float(ev[-1])
    is_psd = lmin >= -tol * max(1.0, lmax)
    rank = int(np.sum(ev > tol * lmax)) if lmax > 0 else 0
    return PsdResult(bool(is_psd), rank, lmin, lmax)


def as_matrix(M) -> np.ndarray:
    M = np.array(M, dtype=complex)
    if M.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d matrix, got shape {M.shape}")
    return M


# -- JSON formats -----------------------------------------------------------

def complex_pair(z) -> list:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def matrix_to_dict(M) -> dict:
    M = as_matrix(M)
    r, c = M.shape
    return {"rows": r, "cols": c, "data": [complex_pair(z) for z in M.ravel()]}


def matrix_from_dict(obj: dict) -> np.ndarray:
    r, c = int(obj["rows"]), int(obj["cols"])
    data = obj["data"]
    if len(data) != r * c:
        raise ValueError(f"matrix file has {len(data)} entries, expected {r * c}")
    flat = np.array([complex(float(re), float(im)) for re, im in data], dtype=complex)
    return flat.reshape(r, c)


def dumps(obj) -> str:
    # repr-based float output is the shortest string that round-trips exactly
    return json.dumps(obj, sort_keys=True, allow_nan=False)


def write_matrix(path, M) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(matrix_to_dict(M)))


def read_matrix(path) -> np.ndarray:
    with open(path) as fh:
        return matrix_from_dict(json.load(fh))
