"""Reproducing-kernel diagnostics for the space H(Q) on the polydisk.

H(Q) is never built as a function space. Its inner product is only needed on
the kernel columns phi_{J,v}(z) = sum_I Q_{I,J} v z^I, and there

    <phi_{J,v}, phi_{J2,v2}> = <Q_{J2,J} v, v2>,

so everything below reduces to finite matrix computations on sections of Q.
Inner products are linear in the first slot: <x, y> = y^H x.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import PSD_TOL, Window, factorial, graded_lex_key, psd_check, validate_index
from .infop import BlockOperator, window_extract

GS_TOL = 1e-10
TIKHONOV = 1e-12


@dataclass
class PolyFunction:
    """f(z) = sum_I v_I z^I with vector coefficients v_I in C^c."""

    d: int
    c: int
    coeffs: dict = field(default_factory=dict)

    @property
    def degree(self) -> int:
        live = [sum(I) for I, v in self.coeffs.items() if np.any(v != 0)]
        return max(live) if live else -1

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex).reshape(self.d)
        out = np.zeros(self.c, dtype=complex)
        for I, v in self.coeffs.items():
            out += np.prod(z ** np.array(I)) * v
        return out

    def __add__(self, other: PolyFunction) -> PolyFunction:
        coeffs = {I: v.copy() for I, v in self.coeffs.items()}
        for I, v in other.coeffs.items():
            coeffs[I] = coeffs[I] + v if I in coeffs else v.copy()
        return PolyFunction(self.d, self.c, coeffs)

    def scale(self, a: complex) -> PolyFunction:
        return PolyFunction(self.d, self.c, {I: a * v for I, v in self.coeffs.items()})

    def coefficient(self, I) -> np.ndarray:
        return self.coeffs.get(tuple(I), np.zeros(self.c, dtype=complex))


def _vec(op: BlockOperator, v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    if v.shape[0] != op.c:
        raise ValueError(f"vector of length {v.shape[0]} for block size {op.c}")
    return v


def phi(op: BlockOperator, J, v) -> PolyFunction:
    J, v = validate_index(J), _vec(op, v)
    coeffs = {I: blk @ v for I, blk in op.column(J).items()}
    return PolyFunction(op.d, op.c, coeffs)


def gram(op: BlockOperator, J, v, J2, v2) -> complex:
    """<phi_{J,v}, phi_{J2,v2}> in H(Q)."""
    v, v2 = _vec(op, v), _vec(op, v2)
    return complex(np.vdot(v2, op.block(J2, J) @ v))


def apply_LJ(op: BlockOperator, f_span, J) -> np.ndarray:
    """J-th Taylor derivative at 0 of f = sum_m phi_{J_m, v_m}."""
    J = validate_index(J)
    out = np.zeros(op.c, dtype=complex)
    for Jm, vm in f_span:
        out += op.block(J, Jm) @ _vec(op, vm)
    return factorial(J) * out


@dataclass
class NormLJ:
    value: float
    lower_bound: float


def norm_LJ(op: BlockOperator, J, window: Window | None = None) -> NormLJ:
    """Norm of the functional f -> f^{(J)}(0) on H(Q).

    The value is J! * lambda_max(Q_{J,J})^{1/2}. The lower bound maximizes
    |L_J f| / ||f|| over the span of kernel columns in ``window`` (default:
    the smallest box holding J and its column support).
    """
    J = validate_index(J)
    lmax = float(np.linalg.eigvalsh(op.block(J, J))[-1])
    value = factorial(J) * np.sqrt(max(lmax, 0.0))
    if window is None:
        radius = max([max(J)] + [max(I) for I in op.column(J)])
        window = Window(op.d, radius)
    lower = factorial(J) * cmin(op, window, J)
    return NormLJ(float(value), float(lower))


def _range_sqrt_pinv(Q: np.ndarray, tol: float = PSD_TOL):
    ev, V = np.linalg.eigh(Q)
    lmax = ev[-1] if ev.size else 0.0
    keep = ev > tol * lmax if lmax > 0 else np.zeros_like(ev, dtype=bool)
    Vr = V[:, keep]
    return Vr, Vr / np.sqrt(ev[keep])


def cmin(op: BlockOperator, w: Window, J, v=None) -> float:
    """Smallest c >= 0 with q_J Pi q_J^H <= c^2 Q on the section ``w``.

    q_J is the block column J of the section; Pi is the identity or the
    projection onto span{v}. Computed as the largest eigenvalue of the pencil
    restricted to Ran Q.
    """
    J = validate_index(J)
    if J not in w or any(I not in w for I in op.column(J)):
        raise ValueError(f"window n={w.n} does not contain column {J} and its support")
    c = op.c
    Q = window_extract(op, w)
    p = w.positions()[J]
    q = Q[:, p * c:(p + 1) * c]
    if v is not None:
        v = _vec(op, v)
        v = v / np.linalg.norm(v)
        q = q @ v[:, None]
    Vr, S = _range_sqrt_pinv(Q)
    if q.size and Vr.shape[1] == 0:
        return 0.0 if not np.any(q) else float("inf")
    # columns of Q lie in Ran Q; anything else means the section is broken
    leak = np.linalg.norm(q - Vr @ (Vr.conj().T @ q))
    assert leak <= 1e-8 * (1 + np.linalg.norm(q)), "kernel column escapes Ran Q"
    M = S.conj().T @ q
    return float(np.sqrt(max(np.linalg.eigvalsh(M @ M.conj().T)[-1], 0.0)))


# -- kernel -----------------------------------------------------------------

@dataclass
class KernelSpec:
    """Kernel K(z, w) = sum_{I,J} z^I conj(w)^J Q_{I,J}, summed over a box.

    ``trunc_n`` is the box bound; for stored operators it defaults to the
    support radius, which makes the sum exact.
    """

    op: BlockOperator
    trunc_n: int | None = None

    def __post_init__(self):
        if self.trunc_n is None:
            self.trunc_n = self.op.support_radius() if self.op.finite else 64

    @property
    def exact(self) -> bool:
        return self.op.finite and self.trunc_n >= self.op.support_radius()


@dataclass
class KernelValue:
    value: np.ndarray
    tail_bound: float


def _point(z, d: int) -> np.ndarray:
    z = np.asarray(z, dtype=complex).reshape(-1)
    if z.shape[0] != d:
        raise ValueError(f"point of dimension {z.shape[0]}, expected {d}")
    if np.any(np.abs(z) >= 1):
        raise ValueError("point must lie in the open unit polydisk")
    return z


def _monomials(z: np.ndarray, idx: list) -> np.ndarray:
    return np.array([np.prod(z ** np.array(I)) for I in idx])


def _tail(z: np.ndarray, w: np.ndarray, n: int) -> float:
    a = np.abs(z)
    b = np.abs(w)
    full = np.prod(1 / (1 - a)) * np.prod(1 / (1 - b))
    box = np.prod((1 - a ** (n + 1)) / (1 - a)) * np.prod((1 - b ** (n + 1)) / (1 - b))
    return float(max(full - box, 0.0))


def kernel_eval(spec: KernelSpec, z, w) -> KernelValue:
    op = spec.op
    z, w = _point(z, op.d), _point(w, op.d)
    win = Window(op.d, spec.trunc_n)
    idx = win.indices()
    Q = window_extract(op, win)
    c = op.c
    mz = np.kron(_monomials(z, idx), np.eye(c))
    mw = np.kron(_monomials(w, idx), np.eye(c))
    K = mz @ Q @ mw.conj().T
    tail = 0.0 if spec.exact else op.norm_bound() * _tail(z, w, spec.trunc_n)
    return KernelValue(K, tail)


@dataclass
class PositivityReport:
    min_eig: float
    tail_total: float
    passed: bool


def kernel_positivity_sample(spec: KernelSpec, points, tol: float = 1e-8) -> PositivityReport:
    """Min eigenvalue of the sampled kernel Gram [K(z_i, z_j)].

    Passes when it is at least -(tol * max(1, lambda_max) + summed tail bounds).
    """
    c = spec.op.c
    pts = list(points)
    G = np.zeros((len(pts) * c, len(pts) * c), dtype=complex)
    tail = 0.0
    for i, zi in enumerate(pts):
        for j, zj in enumerate(pts):
            kv = kernel_eval(spec, zi, zj)
            G[i * c:(i + 1) * c, j * c:(j + 1) * c] = kv.value
            tail += kv.tail_bound
    G = (G + G.conj().T) / 2
    ev = np.linalg.eigvalsh(G)
    lmin = float(ev[0])
    ok = lmin >= -(tol * max(1.0, float(ev[-1])) + tail)
    return PositivityReport(lmin, tail, bool(ok))


@dataclass
class Projection:
    error: float
    error_sq: float
    coefficients: np.ndarray
    tail_bound: float


def _family_section(op: BlockOperator, S: list) -> np.ndarray:
    """Gram matrix of {phi_{J,e_s} : J in S}, rows (J2, s2), columns (J, s)."""
    c = op.c
    G = np.zeros((len(S) * c, len(S) * c), dtype=complex)
    for a, J2 in enumerate(S):
        for b, J in enumerate(S):
            G[a * c:(a + 1) * c, b * c:(b + 1) * c] = op.block(J2, J)
    return G


def density_projection(op: BlockOperator, S, wpt, v, trunc_n: int | None = None) -> Projection:
    """Distance in H(Q) from K(., wpt) v to span{phi_{J,e_s} : J in S}.

    Coefficients come from the Tikhonov-regularized normal equations. The
    reported error is the true H(Q) residual of those coefficients, measured
    against the kernel truncated to the box of ``trunc_n``.
    """
    S = [validate_index(J) for J in S]
    v = _vec(op, v)
    c = op.c
    spec = KernelSpec(op, trunc_n)
    wpt = _point(wpt, op.d)
    n = max([spec.trunc_n] + [max(J) for J in S])
    win = Window(op.d, n)
    idx = win.indices()
    QT = window_extract(op, win)
    # K(., w) v = sum_J phi_{J, conj(w^J) v}
    t = np.kron(np.conj(_monomials(wpt, idx)), v)
    tail = 0.0 if op.finite and n >= op.support_radius() else op.norm_bound() * _tail(wpt, wpt, n)
    if not S:
        err_sq = float(np.vdot(t, QT @ t).real)
        return Projection(np.sqrt(max(err_sq, 0.0)), err_sq, np.zeros(0, dtype=complex), tail)
    rank = {I: p for p, I in enumerate(idx)}
    pos = np.array([rank[J] * c + s for J in S for s in range(c)])
    G = QT[np.ix_(pos, pos)]
    b = (QT @ t)[pos]
    lmax = max(float(np.linalg.eigvalsh(G)[-1]), 0.0)
    delta = TIKHONOV * lmax if lmax > 0 else TIKHONOV
    x = np.linalg.solve(G + delta * np.eye(G.shape[0]), b)
    y = t.copy()
    y[pos] -= x
    err_sq = float(np.vdot(y, QT @ y).real)
    return Projection(float(np.sqrt(max(err_sq, 0.0))), err_sq, x, tail)


@dataclass
class OrthonormalFamily:
    polys: list
    coefficients: np.ndarray  # family-by-basis matrix X, basis_k = sum_m X[m, k] g_m
    norms: list
    labels: list


def onb_polynomials(op: BlockOperator, S, gs_tol: float = GS_TOL) -> OrthonormalFamily:
    """Gram-Schmidt on phi_{J,e_s} (J in graded-lex order, then s) in H(Q)."""
    S = sorted((validate_index(J) for J in S), key=graded_lex_key)
    c = op.c
    G = _family_section(op, S)
    labels = [(J, s) for J in S for s in range(c)]
    m = len(labels)
    # work with a square root R of G so residual norms are plain 2-norms;
    # sqrt of a quadratic form would only be accurate to sqrt(eps)
    lam, V = np.linalg.eigh(G)
    lam = np.where(lam > m * np.finfo(float).eps * max(lam[-1], 0.0), lam, 0.0) if m else lam
    R = np.sqrt(lam)[:, None] * V.conj().T
    basis, images, norms = [], [], []
    largest = 0.0
    for k in range(m):
        x = np.zeros(m, dtype=complex)
        x[k] = 1.0
        y = R[:, k].copy()
        largest = max(largest, float(np.linalg.norm(y)))
        for _ in range(2):
            for u, yu in zip(basis, images):
                h = np.vdot(yu, y)
                x = x - h * u
                y = y - h * yu
        nrm = float(np.linalg.norm(y))
        if nrm <= gs_tol * largest:
            continue
        basis.append(x / nrm)
        images.append(y / nrm)
        norms.append(nrm)
    X = np.array(basis).T if basis else np.zeros((m, 0), dtype=complex)
    polys = []
    for k in range(X.shape[1]):
        f = PolyFunction(op.d, c, {})
        for (J, s), a in zip(labels, X[:, k]):
            if a != 0:
                e = np.zeros(c, dtype=complex)
                e[s] = a
                f = f + phi(op, J, e)
        polys.append(f)
    return OrthonormalFamily(polys, X, norms, labels)


def family_gram(op: BlockOperator, fam: OrthonormalFamily) -> np.ndarray:
    S = sorted({J for J, _ in fam.labels}, key=graded_lex_key)
    G = _family_section(op, S)
    X = fam.coefficients
    return X.conj().T @ G @ X
