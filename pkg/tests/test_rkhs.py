import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import crandn
from oracles import pencil_oracle
from uppertri.core import Window, factorial
from uppertri.infop import BlockOperator, block_operator_from_dense, gen_upper, identity_operator, window_extract
from uppertri.rkhs import (
    KernelSpec,
    apply_LJ,
    cmin,
    density_projection,
    family_gram,
    gram,
    kernel_eval,
    kernel_positivity_sample,
    norm_LJ,
    onb_polynomials,
    phi,
)
from uppertri.toeplitz import Symbol, toeplitz_operator

TOEP = toeplitz_operator(Symbol({0: 1.25, 1: 0.5}))


def _coeffs(f):
    return {I: complex(v[0]) for I, v in f.coeffs.items()}


def test_phi_examples():
    assert _coeffs(phi(identity_operator(), (2,), [1])) == {(2,): 1}
    assert _coeffs(phi(TOEP, (1,), [1])) == {(0,): 0.5, (1,): 1.25, (2,): 0.5}
    f = phi(TOEP, (1,), [0])
    assert f.degree == -1 and np.all(f((0.3,)) == 0)


def test_phi_is_polynomial_of_column():
    inst = gen_upper(2, 2, 2, 2, seed=1)
    v = np.array([1.0, -2j])
    f = phi(inst.Q, (1, 1), v)
    z = np.array([0.3 - 0.1j, 0.5j])
    expected = sum(np.prod(z ** np.array(I)) * (inst.Q.block(I, (1, 1)) @ v) for I in Window(2, 4).indices())
    np.testing.assert_allclose(f(z), expected, atol=1e-14)


def test_gram_examples():
    assert gram(identity_operator(), (1,), [1], (1,), [1]) == 1
    assert gram(TOEP, (0,), [1], (1,), [1]) == 0.5
    assert gram(TOEP, (0,), [1], (5,), [1]) == 0


def test_apply_LJ_examples():
    assert apply_LJ(identity_operator(), [((1,), [1])], (1,))[0] == 1
    assert apply_LJ(TOEP, [((1,), [1])], (2,))[0] == 2 * 0.5
    assert apply_LJ(TOEP, [((1,), [1])], (7,))[0] == 0


def test_apply_LJ_is_taylor_coefficient(rng):
    inst = gen_upper(2, 2, 2, 2, seed=3)
    span = [((1, 0), crandn(rng, 2)), ((2, 1), crandn(rng, 2)), ((0, 2), crandn(rng, 2))]
    f = phi(inst.Q, *span[0]) + phi(inst.Q, *span[1]) + phi(inst.Q, *span[2])
    for J in Window(2, 3).indices():
        np.testing.assert_array_equal(apply_LJ(inst.Q, span, J), factorial(J) * f.coefficient(J))


def test_norm_LJ_examples():
    assert norm_LJ(identity_operator(), (3,)).value == pytest.approx(6.0)
    r = norm_LJ(TOEP, (1,), Window(1, 8))
    assert r.value == pytest.approx(np.sqrt(1.25))
    assert r.lower_bound <= r.value + 1e-10
    zero = BlockOperator(1, 1, {((0,), (0,)): [[1.0]]})
    assert norm_LJ(zero, (2,)).value == 0.0


def test_cmin_examples():
    w = Window(1, 6)
    for J in [(0,), (3,), (6,)]:
        assert cmin(identity_operator(), w, J) == pytest.approx(1.0)
    c = cmin(TOEP, Window(1, 8), (1,))
    Q8 = window_extract(TOEP, Window(1, 8))
    assert np.sqrt(1.25) - 1e-8 <= c <= np.sqrt(np.linalg.eigvalsh(Q8)[-1]) + 1e-8
    q = Q8[:, [1]]
    assert c == pytest.approx(np.sqrt(pencil_oracle(q @ q.conj().T, Q8)), abs=1e-10)


def test_cmin_rank_one(rng):
    w = Window(1, 4)
    q = crandn(rng, 5)
    op = block_operator_from_dense(np.outer(q, q.conj()), w)
    # q_J q_J^* = |q_J|^2 qq^*, so the constant is |q_J|
    for J in range(5):
        assert cmin(op, w, (J,)) == pytest.approx(abs(q[J]), rel=1e-9)
    e = np.zeros(5, complex)
    e[2] = 1.7 - 0.4j
    op = block_operator_from_dense(np.outer(e, e.conj()), w)
    assert cmin(op, w, (2,)) == pytest.approx(np.linalg.norm(e), rel=1e-12)


def test_cmin_window_too_small():
    with pytest.raises(ValueError):
        cmin(TOEP, Window(1, 3), (3,))


def test_cmin_per_vector_below_full(rng):
    inst = gen_upper(1, 2, 5, 2, seed=9)
    w = Window(1, 5)
    for J in w.indices():
        full = cmin(inst.Q, w, J)
        for _ in range(3):
            assert cmin(inst.Q, w, J, crandn(rng, 2)) <= full + 1e-10


def test_kernel_eval_identity_geometric():
    spec = KernelSpec(identity_operator(), trunc_n=30)
    kv = kernel_eval(spec, [0.5], [0.5])
    partial = sum(0.25 ** k for k in range(31))
    assert kv.value[0, 0] == pytest.approx(partial, rel=1e-15)
    assert 1 / 0.75 - partial <= kv.tail_bound


def test_kernel_eval_at_origin():
    inst = gen_upper(2, 2, 2, 1, seed=2)
    kv = kernel_eval(KernelSpec(inst.Q), [0, 0], [0, 0])
    np.testing.assert_array_equal(kv.value, inst.Q.block((0, 0), (0, 0)))
    assert kv.tail_bound == 0.0


def test_kernel_eval_rejects_boundary():
    with pytest.raises(ValueError):
        kernel_eval(KernelSpec(TOEP), [1.0], [0.0])


def test_kernel_positivity_examples(rng):
    pts = [[0.6 * np.exp(1j * t)] for t in rng.uniform(0, 2 * np.pi, 6)]
    assert kernel_positivity_sample(KernelSpec(identity_operator(), 60), pts).passed
    assert kernel_positivity_sample(KernelSpec(TOEP, 60), [[0.3j]]).passed
    inst = gen_upper(2, 1, 3, 2, seed=17)
    pts = [crandn(rng, 2) * 0.4 for _ in range(5)]
    rep = kernel_positivity_sample(KernelSpec(inst.Q), pts)
    assert rep.passed and rep.tail_total == 0.0


def test_density_identity_tail():
    for m in (0, 2, 5):
        p = density_projection(identity_operator(), [(k,) for k in range(m + 1)], [0.5], [1], trunc_n=200)
        assert p.error_sq == pytest.approx(0.25 ** (m + 1) / 0.75, rel=1e-9)


def test_density_origin_exact():
    p = density_projection(TOEP, [(0,)], [0.0], [1], trunc_n=20)
    assert p.error <= 1e-7


def test_density_finite_support_exact(rng):
    inst = gen_upper(1, 2, 4, 2, seed=6)
    S = Window(1, 4).indices()
    p = density_projection(inst.Q, S, [0.45 - 0.2j], crandn(rng, 2))
    assert p.tail_bound == 0.0
    assert p.error <= 1e-5 and abs(p.error_sq) <= 1e-10


def test_density_monotone_along_prefixes(rng):
    inst = gen_upper(2, 1, 3, 2, seed=12)
    idx = Window(2, 3).indices()
    errs = [density_projection(inst.Q, idx[:k], [0.5, -0.3j], [1.0]).error_sq for k in range(len(idx) + 1)]
    for a, b in zip(errs, errs[1:]):
        assert b <= a + 1e-12


def test_onb_identity_is_monomials():
    fam = onb_polynomials(identity_operator(d=2), Window(2, 1).indices())
    assert len(fam.polys) == 4
    for f, (J, _) in zip(fam.polys, fam.labels):
        assert list(f.coeffs) == [J] and f.coeffs[J][0] == pytest.approx(1.0)


def test_onb_rank_one(rng):
    q = crandn(rng, 4)
    op = block_operator_from_dense(np.outer(q, q.conj()), Window(1, 3))
    fam = onb_polynomials(op, Window(1, 3).indices())
    assert len(fam.polys) == 1


def test_onb_toeplitz():
    S = [(k,) for k in range(6)]
    fam = onb_polynomials(TOEP, S)
    assert len(fam.polys) == 6
    G = family_gram(TOEP, fam)
    assert np.abs(G - np.eye(6)).max() <= 1e-10


def test_onb_reproduces_family(rng):
    inst = gen_upper(1, 2, 4, 2, seed=21)
    S = Window(1, 4).indices()
    fam = onb_polynomials(inst.Q, S)
    from uppertri.rkhs import _family_section
    G = _family_section(inst.Q, S)
    X = fam.coefficients
    for k in range(G.shape[0]):
        e = np.zeros(G.shape[0], complex)
        e[k] = 1
        proj = X @ (X.conj().T @ G @ e)
        r = e - proj
        assert np.sqrt(abs(np.vdot(r, G @ r))) <= 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 2), st.integers(1, 2), st.integers(1, 3), st.integers(0, 2**31))
def test_gram_equals_window_extract(d, c, n, seed):
    inst = gen_upper(d, c, n, 2, seed=seed)
    w = Window(d, n)
    M = window_extract(inst.Q, w)
    idx = w.indices()
    eye = np.eye(c)
    for a, J2 in enumerate(idx):
        for b, J in enumerate(idx):
            for s2 in range(c):
                for s in range(c):
                    assert abs(gram(inst.Q, J, eye[s], J2, eye[s2]) - M[a * c + s2, b * c + s]) <= 1e-14


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 2), st.integers(1, 2), st.integers(0, 2**31))
def test_pairing_identity(d, c, seed):
    rng = np.random.default_rng(seed)
    inst = gen_upper(d, c, 3, 2, seed=seed)
    idx = Window(d, 3).indices()
    span = [(idx[k], crandn(rng, c)) for k in rng.choice(len(idx), 3, replace=False)]
    J = idx[rng.integers(len(idx))]
    v = crandn(rng, c)
    lhs = sum(gram(inst.Q, Jm, vm, J, factorial(J) * v) for Jm, vm in span)
    rhs = np.vdot(v, apply_LJ(inst.Q, span, J))
    scale = factorial(J) * max(np.linalg.norm(vm) for _, vm in span) * np.linalg.norm(v)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, scale)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 2), st.integers(1, 2), st.integers(0, 2**31))
def test_cmin_chain(d, c, seed):
    inst = gen_upper(d, c, 3, 2, seed=seed)
    w = Window(d, 5)
    top = np.sqrt(np.linalg.eigvalsh(window_extract(inst.Q, w))[-1])
    for J in Window(d, 3).indices():
        low = np.sqrt(np.linalg.eigvalsh(inst.Q.block(J, J))[-1])
        cm = cmin(inst.Q, w, J)
        assert low - 1e-8 <= cm <= top + 1e-8
