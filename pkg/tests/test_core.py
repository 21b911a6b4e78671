import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import crandn
from oracles import eig_oracle
from uppertri.core import (
    DimensionMismatch,
    NotHermitianError,
    Window,
    factorial,
    graded_lex_key,
    graded_lex_rank,
    leq,
    matrix_from_dict,
    matrix_to_dict,
    pattern_nest_tensor,
    psd_check,
    read_matrix,
    universal_columns,
    window_enumerate,
    write_matrix,
)


@pytest.mark.parametrize("I, J, expected", [
    ((1, 2), (2, 2), True),
    ((1, 2), (2, 1), False),
    ((0, 0, 0), (0, 0, 0), True),
])
def test_leq_examples(I, J, expected):
    assert leq(I, J) is expected


def test_leq_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        leq((1,), (1, 2))


def test_factorial():
    assert factorial((0, 3, 2)) == 12


def test_window_enumerate_examples():
    assert window_enumerate(Window(1, 2)) == [(0,), (1,), (2,)]
    assert window_enumerate(Window(2, 1)) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    w = Window(2, 2)
    idx = window_enumerate(w)
    assert len(idx) == 9 == len(w) and idx[-1] == (2, 2)


def test_window_is_down_closed():
    w = Window(3, 2)
    members = set(w.indices())
    for I in members:
        for J in itertools.product(*(range(i + 1) for i in I)):
            assert J in members


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("n", [0, 1, 2, 3, 4])
def test_graded_lex_refines_leq(d, n):
    idx = Window(d, n).indices()
    pos = {I: p for p, I in enumerate(idx)}
    for I, J in itertools.product(idx, repeat=2):
        if leq(I, J) and I != J:
            assert pos[I] < pos[J]


@pytest.mark.parametrize("d", [1, 2, 3])
def test_graded_lex_rank_matches_enumeration(d):
    # every index of total degree <= 6 lies in the box [0, 6]^d
    idx = [I for I in Window(d, 6).indices() if sum(I) <= 6]
    assert [graded_lex_rank(I) for I in idx] == list(range(len(idx)))


def test_pattern_nest_tensor_d2():
    mask = pattern_nest_tensor(2, Window(2, 1)).mask()
    allowed = {(i + 1, j + 1) for i, j in zip(*np.nonzero(mask))}
    assert allowed == {(1, 1), (1, 2), (1, 3), (1, 4), (2, 2), (2, 4), (3, 3), (3, 4), (4, 4)}
    # the (0,1) / (1,0) pair from the counterexample is forbidden
    assert not mask[1, 2]


@pytest.mark.parametrize("n", [0, 3, 6])
def test_pattern_d1_is_upper_triangular(n):
    mask = pattern_nest_tensor(1, Window(1, n)).mask()
    np.testing.assert_array_equal(mask, np.triu(np.ones((n + 1, n + 1), bool)))


def test_pattern_diagonal_always_allowed():
    pat = pattern_nest_tensor(3, Window(3, 2))
    assert all(pat.allowed(I, I) for I in pat.rows)
    assert pat.is_upper()


def test_universal_columns_dominate_window():
    w = Window(3, 2)
    for K in universal_columns(w, 5):
        assert all(leq(I, K) for I in w.indices())


def test_psd_check_examples():
    r = psd_check(np.eye(3), tol=1e-10)
    assert (r.is_psd, r.rank) == (True, 3) and r.min_eig == pytest.approx(1.0)
    r = psd_check([[1, 1], [1, 1]])
    assert (r.is_psd, r.rank) == (True, 1) and abs(r.min_eig) < 1e-15
    r = psd_check([[0, 1], [1, 0]])
    assert not r.is_psd and r.min_eig == pytest.approx(-1.0)


def test_psd_check_rejects_non_hermitian():
    with pytest.raises(NotHermitianError):
        psd_check([[1, 2], [0, 1]])


def test_psd_check_matches_eig_oracle(rng):
    for _ in range(20):
        X = crandn(rng, 8, 8)
        M = X + X.conj().T
        r = psd_check(M)
        ev = eig_oracle(M)
        assert abs(r.min_eig - ev[0]) <= 1e-10 * max(1, abs(ev).max())
        assert r.is_psd == (ev[0] >= -1e-10 * max(1, ev[-1]))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_matrix_json_round_trip_bit_exact(tmp_path_factory, r, c, seed):
    rng = np.random.default_rng(seed)
    M = crandn(rng, r, c) * 10.0 ** rng.integers(-300, 300, size=(r, c))
    path = tmp_path_factory.mktemp("m") / "m.json"
    write_matrix(path, M)
    back = read_matrix(path)
    assert back.tobytes() == M.tobytes()


def test_matrix_dict_layout():
    obj = matrix_to_dict([[1 + 2j, 3], [4, 5j]])
    assert obj == {"rows": 2, "cols": 2, "data": [[1.0, 2.0], [3.0, 0.0], [4.0, 0.0], [0.0, 5.0]]}
    assert matrix_from_dict(json.loads(json.dumps(obj)))[1, 1] == 5j


def test_graded_lex_key_orders_by_degree_first():
    assert sorted([(2, 0), (0, 1), (1, 1)], key=graded_lex_key) == [(0, 1), (1, 1), (2, 0)]
