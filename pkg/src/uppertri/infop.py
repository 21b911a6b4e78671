"""Column-supported block operators on l^2(C^c) tensored d times.

An operator is known through its columns: ``op.column(K)`` maps row indices
I to the c x c block Q_{I,K}. Every column has finite support, which is the
standing hypothesis for the eventually-zero factorization result.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import (
    NotHermitianError,
    Window,
    complex_pair,
    dumps,
    graded_lex_key,
    graded_lex_rank,
    leq,
    psd_check,
    validate_index,
    IndefiniteError,
)
from .factor import FactorResult, hotel_factor, reverse_cholesky, verify_factor

BLOCK_TOL = 1e-12


class ConvergenceError(RuntimeError):
    """Truncation schedule exhausted without meeting the tolerance."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


class BlockOperator:
    """Hermitian operator stored as finitely many c x c blocks.

    ``entries`` maps (I, K) to a block. Either member of a mirror pair may
    be given; giving both requires them to agree. Diagonal blocks are
    symmetrized so every window section is exactly hermitian.
    """

    def __init__(self, d: int, c: int, entries: dict | None = None):
        if d < 1 or c < 1:
            raise ValueError(f"bad operator shape d={d}, c={c}")
        self.d, self.c = d, c
        upper = {}
        for (I, K), block in (entries or {}).items():
            I, K = validate_index(I), validate_index(K)
            if len(I) != d or len(K) != d:
                raise ValueError(f"index of wrong dimension in ({I}, {K})")
            block = np.array(block, dtype=complex).reshape(c, c)
            if graded_lex_key(I) > graded_lex_key(K):
                I, K, block = K, I, block.conj().T
            if I == K:
                if np.abs(block - block.conj().T).max() > BLOCK_TOL * (1 + np.abs(block).max()):
                    raise NotHermitianError(f"diagonal block at {I} is not hermitian")
                block = (block + block.conj().T) / 2
            if (I, K) in upper:
                prev = upper[(I, K)]
                if np.abs(prev - block).max() > BLOCK_TOL * (1 + np.abs(block).max()):
                    raise NotHermitianError(f"mirror entries disagree at ({I}, {K})")
                continue
            if np.any(block != 0):
                upper[(I, K)] = block
        self._upper = upper
        cols: dict = {}
        for (I, K), block in upper.items():
            cols.setdefault(K, {})[I] = block
            if I != K:
                cols.setdefault(I, {})[K] = block.conj().T
        self._cols = cols

    finite = True

    def column(self, K) -> dict:
        return self._cols.get(tuple(K), {})

    def block(self, I, K) -> np.ndarray:
        b = self.column(K).get(tuple(I))
        return np.zeros((self.c, self.c), dtype=complex) if b is None else b

    def stored_columns(self) -> list:
        return sorted(self._cols, key=graded_lex_key)

    def upper_entries(self) -> dict:
        return dict(self._upper)

    def norm_bound(self) -> float:
        """Upper bound on the operator norm (Schur test on block norms)."""
        if not self._cols:
            return 0.0
        col_sums = [sum(np.linalg.norm(b, 2) for b in col.values()) for col in self._cols.values()]
        return float(max(col_sums))

    def support_radius(self) -> int:
        """Largest coordinate of any stored index."""
        return max((max(K) for K in self._cols), default=0)

    def __repr__(self):
        return f"BlockOperator(d={self.d}, c={self.c}, blocks={len(self._upper)})"


class RuleOperator(BlockOperator):
    """Operator whose columns are produced by a rule instead of storage.

    ``column_fn(K)`` must return the full column (both halves) with finite
    support, consistent with hermitian symmetry.
    """

    finite = False

    def __init__(self, d: int, c: int, column_fn: Callable, norm: float):
        super().__init__(d, c, None)
        self._column_fn = column_fn
        self._norm = float(norm)

    def column(self, K) -> dict:
        return {tuple(I): np.asarray(b, dtype=complex).reshape(self.c, self.c)
                for I, b in self._column_fn(tuple(K)).items()}

    def norm_bound(self) -> float:
        return self._norm

    def stored_columns(self) -> list:
        raise TypeError("rule-based operators have no finite column list")


def identity_operator(d: int = 1, c: int = 1) -> RuleOperator:
    eye = np.eye(c, dtype=complex)
    return RuleOperator(d, c, lambda K: {K: eye}, 1.0)


def diagonal_operator(blocks: dict) -> BlockOperator:
    first = next(iter(blocks))
    c = np.atleast_2d(np.asarray(blocks[first])).shape[0]
    return BlockOperator(len(first), c, {(I, I): np.atleast_2d(b) for I, b in blocks.items()})


def block_operator_from_dense(M: np.ndarray, w: Window, c: int = 1) -> BlockOperator:
    """Cut a dense window-layout matrix into blocks; zero blocks are dropped."""
    idx = w.indices()
    entries = {}
    for p, I in enumerate(idx):
        for q, K in enumerate(idx[p:], start=p):
            blk = M[p * c:(p + 1) * c, q * c:(q + 1) * c]
            if np.any(blk != 0):
                entries[(I, K)] = blk
    return BlockOperator(w.d, c, entries)


def window_extract(op: BlockOperator, w: Window) -> np.ndarray:
    """Dense section of ``op`` on ``w`` in graded-lex-by-block layout."""
    if w.d != op.d:
        raise ValueError(f"window dimension {w.d} does not match operator dimension {op.d}")
    c = op.c
    pos = w.positions()
    M = np.zeros((len(pos) * c, len(pos) * c), dtype=complex)
    for K, q in pos.items():
        for I, blk in op.column(K).items():
            p = pos.get(I)
            if p is not None:
                M[p * c:(p + 1) * c, q * c:(q + 1) * c] = blk
    return M


@dataclass
class SupportProfile:
    column_support: dict
    row_profile: dict


def finite_column_check(op: BlockOperator) -> tuple:
    """Return (ok, support profile); s(K) is the largest graded-lex rank of a nonzero row."""
    col_support, row_profile = {}, {}
    for K in op.stored_columns():
        ranks = [graded_lex_rank(I) for I, b in op.column(K).items() if np.any(b != 0)]
        if ranks:
            col_support[K] = max(ranks)
        for I in op.column(K):
            row_profile[I] = max(row_profile.get(I, 0), graded_lex_rank(K))
    return True, SupportProfile(col_support, row_profile)


# -- instance generator -----------------------------------------------------

@dataclass(frozen=True)
class SupportLaw:
    """U_{I,K} may be nonzero when I <= K and |K| - |I| <= band."""

    band: int = 1

    def allowed(self, I, K) -> bool:
        return leq(I, K) and sum(K) - sum(I) <= self.band


@dataclass
class UpperFactor:
    d: int
    c: int
    n: int
    blocks: dict

    def dense(self, w: Window | None = None) -> np.ndarray:
        w = w or Window(self.d, self.n)
        pos = w.positions()
        c = self.c
        M = np.zeros((len(pos) * c, len(pos) * c), dtype=complex)
        for (I, K), b in self.blocks.items():
            if I in pos and K in pos:
                p, q = pos[I], pos[K]
                M[p * c:(p + 1) * c, q * c:(q + 1) * c] = b
        return M


@dataclass
class GeneratedInstance:
    U: UpperFactor
    Q: BlockOperator
    law: SupportLaw
    seed: int
    column_support: dict = field(default_factory=dict)


def gen_upper(d: int, c: int, n: int, law: SupportLaw | int = 1, seed: int = 0,
              offdiag_scale: float = 0.4) -> GeneratedInstance:
    """Random pattern-admissible U on the window [0, n]^d and Q = UU*.

    Uses numpy's PCG64 generator seeded with ``seed``; draws happen in a
    fixed order (columns in graded-lex order, then rows), so instances are
    reproducible bit for bit. Diagonal blocks are upper triangular with real
    diagonal in [1, 2].
    """
    if isinstance(law, int):
        law = SupportLaw(law)
    rng = np.random.default_rng(seed)
    w = Window(d, n)
    idx = w.indices()
    scale = offdiag_scale / math.sqrt(c * (law.band + 1))
    blocks = {}
    for K in idx:
        for I in idx:
            if not law.allowed(I, K):
                continue
            z = rng.standard_normal((c, c)) + 1j * rng.standard_normal((c, c))
            if I == K:
                b = np.triu(z * scale, 1)
                b[np.diag_indices(c)] = rng.uniform(1.0, 2.0, size=c)
            else:
                b = z * scale
            blocks[(I, K)] = b
    U = UpperFactor(d, c, n, blocks)
    Ud = U.dense(w)
    P = Ud @ Ud.conj().T
    # BLAS does not promise a bitwise hermitian product
    P = (P + P.conj().T) / 2
    Q = block_operator_from_dense(P, w, c)

    # structural support of Q's columns, from the pattern alone
    S = np.array([[law.allowed(I, K) for K in idx] for I in idx], dtype=int)
    reach = (S @ S.T) > 0
    supp = {K: max(graded_lex_rank(idx[p]) for p in np.flatnonzero(reach[:, q]))
            for q, K in enumerate(idx)}
    return GeneratedInstance(U, Q, law, seed, supp)


# -- truncation study -------------------------------------------------------

@dataclass
class ConvergenceReport:
    schedule: list
    deltas: list
    residuals: list
    converged: bool
    tol: float
    monotone_violations: list = field(default_factory=list)

    def rows(self) -> list:
        """(n, delta, residual) triples; the first step has no delta."""
        return [(n, d, r) for n, d, r in zip(self.schedule, [math.nan] + self.deltas, self.residuals)]


def _section_factors(op: BlockOperator, schedule, m: int):
    """Yield (n, U_n, corner residual) for each section size in ``schedule``."""
    for n in schedule:
        P = window_extract(op, Window(1, n))
        if not psd_check(P).is_psd:
            raise IndefiniteError(f"section n={n} is not positive semidefinite")
        U = reverse_cholesky(P).factor
        yield n, U, float(np.linalg.norm(U[:m] @ U[:m].conj().T - P[:m, :m]))


def _report(schedule, deltas, residuals, tol) -> ConvergenceReport:
    # residual growth is an empirical observation, reported rather than raised
    violations = [schedule[i + 1] for i in range(len(residuals) - 1)
                  if residuals[i + 1] > residuals[i] + 1e-12]
    converged = bool(deltas) and deltas[-1] <= tol
    return ConvergenceReport(list(schedule), deltas, residuals, converged, tol, violations)


def truncation_study(op: BlockOperator, schedule, compare: Window, tol: float = 1e-8,
                     keep_factor: bool = False):
    """Reverse-Cholesky factor growing sections and watch a fixed corner settle.

    Returns the report, plus the last factor when ``keep_factor`` is set.
    """
    if op.d != 1:
        raise ValueError("plain truncation is only pattern-admissible for d = 1")
    schedule = [int(n) for n in schedule]
    if not schedule or any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be nonempty and strictly increasing")
    if compare.d != 1 or compare.n > schedule[0]:
        raise ValueError("comparison window must fit inside the first section")
    m = len(compare) * op.c
    deltas, residuals, prev, U = [], [], None, None
    for _, U, res in _section_factors(op, schedule, m):
        residuals.append(res)
        if prev is not None:
            deltas.append(float(np.abs(U[:m, :m] - prev).max()))
        prev = U[:m, :m]
    report = _report(schedule, deltas, residuals, tol)
    return (report, U) if keep_factor else report


def geometric_schedule(start: int = 8, max_n: int = 1024) -> list:
    out, n = [], start
    while n <= max_n:
        out.append(n)
        n *= 2
    return out


def factor_eventually_zero(op: BlockOperator, out: Window, tol: float = 1e-8,
                           max_n: int = 1024) -> tuple:
    """Factor a column-finite operator on ``out`` with a pattern-admissible factor.

    Returns ``(FactorResult, ConvergenceReport | None)``.

    d = 1: sections grow along 8 * 2^t (starting at or above ``out.n``)
    until the corner on ``out`` moves by at most ``tol``. The factor has the
    rows of ``out`` and all columns of the last section, so BB* reproduces
    the section of Q on ``out``. Raises ConvergenceError past ``max_n``.

    d >= 2: the section on ``out`` is factored into augmented universal
    columns; there is no truncation to report.
    """
    Q = window_extract(op, out)
    if op.d != 1:
        chk = psd_check(Q)
        if not chk.is_psd:
            raise IndefiniteError("window section is not positive semidefinite")
        return hotel_factor(Q, out, chk.rank), None

    start = 8
    while start < out.n:
        start *= 2
    m = len(out) * op.c
    sched, deltas, residuals, prev, U = [], [], [], None, None
    for n, U, res in _section_factors(op, geometric_schedule(start, max_n), m):
        sched.append(n)
        residuals.append(res)
        if prev is not None:
            deltas.append(float(np.abs(U[:m, :m] - prev).max()))
            if deltas[-1] <= tol:
                break
        prev = U[:m, :m]
    report = _report(sched, deltas, residuals, tol)
    if not report.converged:
        raise ConvergenceError(f"no convergence up to n={max_n}", report)
    B = U[:m]
    res = verify_factor(B, Q, tol=tol)
    rank = psd_check(Q).rank
    cols = [(k,) for k in range(sched[-1] + 1)]
    return FactorResult(B, res.residual_fro, rank, True, cols), report


# -- JSON operator file -----------------------------------------------------

def operator_to_dict(op: BlockOperator) -> dict:
    cols = {}
    for (I, K), b in op.upper_entries().items():
        cols.setdefault(K, []).append(
            {"I": list(I), "block": [[complex_pair(z) for z in row] for row in b]})
    return {
        "d": op.d,
        "c": op.c,
        "columns": [{"K": list(K), "entries": sorted(cols[K], key=lambda e: graded_lex_key(e["I"]))}
                    for K in sorted(cols, key=graded_lex_key)],
    }


def operator_from_dict(obj: dict) -> BlockOperator:
    d, c = int(obj["d"]), int(obj["c"])
    entries = {}
    for col in obj["columns"]:
        K = tuple(col["K"])
        for e in col["entries"]:
            I = tuple(e["I"])
            blk = np.array([[complex(re, im) for re, im in row] for row in e["block"]])
            entries[(I, K)] = blk
    return BlockOperator(d, c, entries)


def write_operator(path, op: BlockOperator) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(operator_to_dict(op)))


def read_operator(path) -> BlockOperator:
    with open(path) as fh:
        return operator_from_dict(json.load(fh))
