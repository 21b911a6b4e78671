import math

import numpy as np
import pytest

from conftest import crandn, random_upper
from oracles import pencil_oracle
from uppertri.core import Window, pattern_nest_tensor
from uppertri.factor import counterexample_matrix, nest_tensor_pattern_for, verify_factor
from uppertri.rangespace import (
    RangeMismatch,
    RangeSpace,
    douglas_constants,
    projector,
    range_contained,
    range_equal,
    tensornest_demo,
)


def _sqrt_psd(Q):
    ev, V = np.linalg.eigh(Q)
    return (V * np.sqrt(np.clip(ev, 0, None))) @ V.conj().T


def _equal_range_pair(rng, n, r):
    C = crandn(rng, n, r) @ crandn(rng, r, n)
    M = crandn(rng, n, n) + 2 * np.eye(n)
    return C @ M, C


def test_range_equal_examples(rng):
    A = crandn(rng, 4, 2)
    assert range_equal(A, A)
    Q = random_upper(rng, 5)
    Q = Q @ Q.conj().T
    assert range_equal(_sqrt_psd(Q), np.eye(5))
    e1, e2 = np.diag([1.0, 0]), np.diag([0, 1.0])
    assert not range_equal(e1, e2)


def test_range_equal_shape_mismatch():
    with pytest.raises(ValueError):
        range_equal(np.eye(2), np.eye(3))


def test_douglas_examples(rng):
    dc = douglas_constants(2 * np.eye(3), np.eye(3))
    assert dc.lam == pytest.approx(4.0) and dc.mu == pytest.approx(0.25)
    dc = douglas_constants(np.diag([1.0, 0.0]), np.eye(2))
    assert dc.lam == pytest.approx(1.0) and dc.mu == math.inf
    U = random_upper(rng, 6)
    Q = U @ U.conj().T
    ev = np.linalg.eigvalsh(Q)
    dc = douglas_constants(_sqrt_psd(Q), np.eye(6))
    assert dc.lam == pytest.approx(ev[-1], rel=1e-10)
    assert dc.mu == pytest.approx(1 / ev[0], rel=1e-8)


def test_douglas_matches_pencil_oracle(rng):
    for _ in range(10):
        A, C = _equal_range_pair(rng, 6, 3)
        dc = douglas_constants(A, C)
        P, R = A @ A.conj().T, C @ C.conj().T
        assert dc.lam == pytest.approx(pencil_oracle(P, R), rel=1e-7)
        assert dc.mu == pytest.approx(pencil_oracle(R, P), rel=1e-7)


def _min_eig(M):
    return np.linalg.eigvalsh((M + M.conj().T) / 2)[0]


def test_douglas_sharpness(rng):
    for n, r in [(5, 5), (6, 3), (8, 2)]:
        A, C = _equal_range_pair(rng, n, r)
        P, R = A @ A.conj().T, C @ C.conj().T
        lam = douglas_constants(A, C).lam
        scale = lam * np.linalg.norm(R, 2)
        assert _min_eig(lam * R - P) >= -1e-10 * scale
        assert _min_eig(0.999 * lam * R - P) < -1e-10 * scale


def test_douglas_infinite_iff_not_contained(rng):
    for k in range(20):
        A = crandn(rng, 5, 2)
        C = crandn(rng, 5, 3) if k % 2 else np.hstack([A, crandn(rng, 5, 1)])
        dc = douglas_constants(A, C)
        assert (dc.lam == math.inf) == (not range_contained(A, C, 1e-10))
        assert (dc.mu == math.inf) == (not range_contained(C, A, 1e-10))


def test_range_space_norm(rng):
    B = crandn(rng, 5, 3)
    rs = RangeSpace(B)
    x = crandn(rng, 3)
    assert rs.rank == 3
    assert rs.norm(B @ x) == pytest.approx(np.linalg.norm(x), rel=1e-10)
    P = projector(B)
    np.testing.assert_allclose(P @ P, P, atol=1e-12)
    y = crandn(rng, 5)
    y -= P @ y
    assert not rs.contains(y)
    with pytest.raises(ValueError):
        rs.norm(y)


def test_tensornest_counterexample_uses_hotel():
    Q, U = counterexample_matrix()
    w = Window(2, 1)
    res = tensornest_demo(U, w)
    assert res.path == "hotel" and res.certificate == [(2, 3)]
    B = res.factor.factor
    assert np.linalg.norm(B @ B.conj().T - Q) <= 1e-12


def test_tensornest_identity_poset():
    res = tensornest_demo(np.eye(4), Window(2, 1))
    assert res.path == "poset"
    np.testing.assert_array_equal(res.factor.factor, np.eye(4))


def test_tensornest_pattern_round_trip(rng):
    w = Window(2, 2)
    mask = pattern_nest_tensor(2, w).mask()
    U = np.where(mask, crandn(rng, 9, 9), 0)
    U[np.diag_indices(9)] = np.abs(np.diagonal(U)) + 1
    res = tensornest_demo(U, w)
    assert res.path == "poset"
    assert np.abs(res.factor.factor - U).max() <= 1e-9 * np.abs(U).max()


def test_tensornest_always_verifies(rng):
    for d, n in [(1, 3), (2, 1), (2, 2)]:
        w = Window(d, n)
        N = len(w)
        for _ in range(5):
            res = tensornest_demo(crandn(rng, N, N), w)
            B = res.factor.factor
            pat = pattern_nest_tensor(d, w) if res.path == "poset" else nest_tensor_pattern_for(B, w)
            assert verify_factor(B, B @ B.conj().T, pat).ok


def test_tensornest_singular_needs_C(rng):
    A = crandn(rng, 4, 2)
    with pytest.raises(RangeMismatch):
        tensornest_demo(A, Window(2, 1))
    res = tensornest_demo(A, Window(2, 1), C=A)
    B = res.factor.factor
    assert np.linalg.norm(B @ B.conj().T - A @ A.conj().T) <= 1e-10 * np.linalg.norm(A) ** 2
