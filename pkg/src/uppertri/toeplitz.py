"""Toeplitz symbols and their analytic (spectral) factors.

A symbol is a real trigonometric polynomial p(t) = sum_k c(k) e^{ikt} with
c(-k) = conj(c(k)). An analytic factor f(z) = sum_k a(k) z^k satisfies
|f(e^{it})|^2 = p(t); it is normalized so that a(0) > 0 and f has no zeros
in the open disk. Two independent routes compute f: root splitting of the
Laurent polynomial, and reading off the interior of truncated reverse
Cholesky factors of T_p (Bauer's method).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import IndefiniteError, dumps, psd_check
from .factor import reverse_cholesky
from .infop import RuleOperator

ROOT_TOL = 1e-6
FACT_TOL = 1e-8
TRIM_TOL = 1e-14


class FactorizationError(ValueError):
    pass


@dataclass
class Symbol:
    """Fourier coefficients c(k) for k >= 0; negative k by conjugation."""

    coeffs: dict

    def __post_init__(self):
        coeffs = {int(k): complex(v) for k, v in self.coeffs.items()}
        if any(k < 0 for k in coeffs):
            raise ValueError("store only k >= 0; negative coefficients are implied")
        c0 = coeffs.get(0, 0j)
        if abs(c0.imag) > 1e-14 * (1 + abs(c0)):
            raise ValueError("c(0) must be real for a real-valued symbol")
        coeffs[0] = complex(c0.real)
        self.coeffs = {k: v for k, v in coeffs.items() if v != 0 or k == 0}

    @classmethod
    def from_analytic(cls, a) -> Symbol:
        """Symbol |f|^2 for f(z) = sum a[k] z^k; c(k) = sum_b a(b+k) conj(a(b))."""
        a = np.asarray(a, dtype=complex)
        m = len(a) - 1
        return cls({k: complex(np.sum(a[k:] * np.conj(a[:m + 1 - k]))) for k in range(m + 1)})

    @property
    def degree(self) -> int:
        live = [k for k, v in self.coeffs.items() if v != 0]
        return max(live) if live else 0

    def coefficient(self, k: int) -> complex:
        if k < 0:
            return complex(np.conj(self.coeffs.get(-k, 0j)))
        return self.coeffs.get(k, 0j)

    def __call__(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        out = np.full(theta.shape, self.coefficient(0).real)
        for k, v in self.coeffs.items():
            if k > 0:
                out = out + 2 * np.real(v * np.exp(1j * k * theta))
        return out

    def grid(self, size: int) -> np.ndarray:
        return 2 * np.pi * np.arange(size) / size

    def is_nonneg(self, size: int = 4096) -> bool:
        vals = self(self.grid(size))
        return bool(vals.min() >= -1e-10 * max(np.abs(vals).max(), 1e-300))

    def to_dict(self) -> dict:
        return {"coeffs": [{"k": k, "re": float(v.real), "im": float(v.imag)}
                           for k, v in sorted(self.coeffs.items())]}

    @classmethod
    def from_dict(cls, obj: dict) -> Symbol:
        return cls({int(e["k"]): complex(e["re"], e.get("im", 0.0)) for e in obj["coeffs"]})


def write_symbol(path, sym: Symbol) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(sym.to_dict()))


def read_symbol(path) -> Symbol:
    with open(path) as fh:
        return Symbol.from_dict(json.load(fh))


def toeplitz_matrix(sym: Symbol, n: int) -> np.ndarray:
    """(T)_{ij} = c(i - j), n x n."""
    i = np.arange(n)
    diff = i[:, None] - i[None, :]
    m = sym.degree
    T = np.zeros((n, n), dtype=complex)
    for k in range(-m, m + 1):
        T[diff == k] = sym.coefficient(k)
    return T


def toeplitz_operator(sym: Symbol) -> RuleOperator:
    """T_p on l^2(N_0) as a rule-based block operator (d = 1, c = 1)."""
    m = sym.degree

    def column(K):
        k = K[0]
        return {(i,): sym.coefficient(i - k) for i in range(max(0, k - m), k + m + 1)
                if sym.coefficient(i - k) != 0}

    norm = sum(abs(sym.coefficient(k)) for k in range(-m, m + 1))
    return RuleOperator(1, 1, column, norm)


@dataclass
class AnalyticFactor:
    coeffs: np.ndarray

    def __call__(self, z):
        return np.polynomial.polynomial.polyval(z, self.coeffs)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1


def _cluster_boundary(roots: np.ndarray, tol: float) -> list:
    """Group roots near the unit circle by angle; returns one angle per pair."""
    if roots.size == 0:
        return []
    ang = np.sort(np.angle(roots))
    groups, cur = [], [ang[0]]
    for a in ang[1:]:
        if a - cur[-1] <= tol:
            cur.append(a)
        else:
            groups.append(cur)
            cur = [a]
    groups.append(cur)
    # wrap-around at +-pi
    if len(groups) > 1 and (groups[0][0] + 2 * np.pi) - groups[-1][-1] <= tol:
        groups[0] = [a - 2 * np.pi for a in groups[-1]] + groups[0]
        groups.pop()
    out = []
    for g in groups:
        if len(g) % 2:
            raise FactorizationError("symbol not factorable at requested precision: "
                                     f"boundary root of odd multiplicity near angle {np.mean(g):.6f}")
        out.extend([float(np.mean(g))] * (len(g) // 2))
    return out


def fejer_riesz(sym: Symbol, tol: float = FACT_TOL, root_tol: float = ROOT_TOL) -> AnalyticFactor:
    """Outer factor f with |f|^2 = p by splitting the roots of z^m p(z).

    Roots pair up as (r, 1/conj(r)); f keeps the member with |r| > 1 and half
    of each (even-multiplicity) cluster on the unit circle.
    """
    m = sym.degree
    if not sym.is_nonneg(max(64 * m, 1024)):
        raise IndefiniteError("symbol takes negative values")
    c0 = sym.coefficient(0).real
    # top coefficients below roundoff of c(0) only push roots to infinity
    while m > 0 and abs(sym.coefficient(m)) <= TRIM_TOL * c0:
        m -= 1
    if m == 0:
        if c0 < 0:
            raise IndefiniteError("negative constant symbol")
        return AnalyticFactor(np.array([math.sqrt(c0)], dtype=complex))
    # z^m p(z) = sum_{k=-m}^{m} c(k) z^{k+m}; numpy.roots wants highest power first
    poly = np.array([sym.coefficient(k) for k in range(m, -m - 1, -1)])
    roots = np.roots(poly)
    mod = np.abs(roots)
    on_circle = np.abs(mod - 1) <= root_tol
    outside = roots[(~on_circle) & (mod > 1)]
    inside = roots[(~on_circle) & (mod < 1)]
    if len(outside) != len(inside):
        raise FactorizationError("roots do not pair across the unit circle")
    angles = _cluster_boundary(roots[on_circle], root_tol)
    zeros = np.concatenate([outside, np.exp(1j * np.array(angles))]) if angles else outside
    if len(zeros) != m:
        raise FactorizationError(f"found {len(zeros)} factor roots, expected {m}")
    g = np.polynomial.polynomial.polyfromroots(zeros).astype(complex)
    # match energy: c(0) = sum |a_k|^2
    g *= math.sqrt(c0 / float(np.sum(np.abs(g) ** 2)))
    g *= np.conj(g[0]) / abs(g[0])
    g[0] = abs(g[0])
    f = AnalyticFactor(g)
    theta = sym.grid(4 * m + 16)
    err = np.abs(np.abs(f(np.exp(1j * theta))) ** 2 - sym(theta)).max()
    if err > tol * max(1.0, float(np.abs(sym(theta)).max())):
        raise FactorizationError(f"|f|^2 misses p by {err:.3e}")
    return f


@dataclass
class BauerStep:
    n: int
    estimate: np.ndarray
    delta: float
    residual: float


@dataclass
class BauerResult:
    coeffs: np.ndarray
    steps: list = field(default_factory=list)

    @property
    def final_delta(self) -> float:
        return self.steps[-1].delta if self.steps else math.nan


def _bauer_read(sym: Symbol, n: int, width: int) -> np.ndarray:
    T = toeplitz_matrix(sym, n)
    if not psd_check(T).is_psd:
        raise IndefiniteError(f"T_p section of size {n} is not positive semidefinite")
    U = reverse_cholesky(T).factor
    j = n // 2
    # U approximates the upper Toeplitz operator with entries conj(a(j - i))
    return np.array([np.conj(U[j - k, j]) if j - k >= 0 else 0j for k in range(width)])


def bauer_factor(sym: Symbol, n: int = 256, width: int | None = None,
                 start: int = 8, check_n: int = 8) -> BauerResult:
    """Analytic factor coefficients from the interior column of truncated factors.

    Runs the dyadic sizes start, 2*start, ..., n (n itself always included);
    each step records the max change against the previous size and the
    residual of the estimate as a Toeplitz factor on a check_n section.
    """
    m = sym.degree
    width = m + 1 if width is None else width
    sizes = []
    s = start
    while s < n:
        sizes.append(s)
        s *= 2
    sizes.append(n)
    steps, prev = [], None
    for size in sizes:
        est = _bauer_read(sym, size, width)
        delta = math.nan if prev is None else float(np.abs(est - prev).max())
        rep = verify_toeplitz_factor(sym, AnalyticFactor(est), check_n)
        steps.append(BauerStep(size, est, delta, rep.residual))
        prev = est
    return BauerResult(steps[-1].estimate, steps)


def write_convergence_csv(path, rows) -> None:
    """CSV with header n,delta,residual."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["n", "delta", "residual"])
        for n, d, r in rows:
            wr.writerow([n, repr(float(d)), repr(float(r))])


@dataclass
class LogIntegral:
    value: float
    integrable: bool
    excluded: int


def log_integrability(sym: Symbol, grid_size: int = 4096, zero_floor: float = 1e-300) -> LogIntegral:
    """Periodic trapezoid estimate of (1/2pi) int log p.

    Grid points with p <= zero_floor are dropped and counted. A nonzero
    nonnegative trig polynomial has only isolated zeros, so its log is
    integrable; only the zero symbol is not.
    """
    vals = sym(sym.grid(grid_size))
    keep = vals > zero_floor
    excluded = int(np.sum(~keep))
    if not keep.any():
        return LogIntegral(-math.inf, False, excluded)
    if vals.min() < -1e-10 * np.abs(vals).max():
        raise IndefiniteError("symbol takes negative values")
    return LogIntegral(float(np.mean(np.log(vals[keep]))), True, excluded)


@dataclass
class ToeplitzCheck:
    ok: bool
    residual: float


def verify_toeplitz_factor(sym: Symbol, f: AnalyticFactor, n: int, tol: float = 1e-10) -> ToeplitzCheck:
    """Check T_p(n) against the leading block of UU*, U upper Toeplitz of conj(f)."""
    a = np.asarray(f.coeffs, dtype=complex)
    m = len(a) - 1
    N = n + m
    U = np.zeros((N, N), dtype=complex)
    for k in range(m + 1):
        U += np.conj(a[k]) * np.eye(N, k=k)
    R = (U @ U.conj().T)[:n, :n] - toeplitz_matrix(sym, n)
    res = float(np.linalg.norm(R))
    return ToeplitzCheck(res <= tol, res)

