import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fockinject.fock import (
    FockError,
    basis_index,
    basis_size,
    enumerate_basis,
    occupation_factorial,
    state_from_json,
    state_to_json,
    substitution_submatrix,
)
from oracles import count_states, random_unitary


def test_two_modes_one_photon():
    b = enumerate_basis(2, 1)
    assert b.states == ((1, 0), (0, 1))
    assert b.dim == 2


def test_single_mode():
    assert enumerate_basis(1, 4).states == ((4,),)


def test_six_modes_three_photons():
    assert enumerate_basis(6, 3).dim == 56


def test_vacuum_sector():
    assert enumerate_basis(3, 0).states == ((0, 0, 0),)


@pytest.mark.parametrize("m", range(1, 9))
@pytest.mark.parametrize("n", range(0, 7))
def test_size_matches_recursive_count(m, n):
    assert enumerate_basis(m, n).dim == count_states(m, n) == basis_size(m, n)


def test_order_is_lexicographically_descending():
    states = enumerate_basis(4, 3).states
    assert list(states) == sorted(states, reverse=True)
    assert len(set(states)) == len(states)
    assert all(sum(s) == 3 for s in states)


def test_rejects_zero_modes():
    with pytest.raises(FockError):
        enumerate_basis(0, 2)
    with pytest.raises(FockError):
        enumerate_basis(2, -1)


def test_basis_size_overflow_detected():
    with pytest.raises(OverflowError):
        basis_size(200, 200)


def test_index_examples():
    assert basis_index(enumerate_basis(2, 1), (1, 0)) == 0
    b = enumerate_basis(3, 3)
    assert basis_index(b, (0, 0, 3)) == b.dim - 1


def test_index_round_trip():
    b = enumerate_basis(4, 2)
    for k, s in enumerate(b.states):
        assert basis_index(b, s) == k
        assert b[k] == s


@pytest.mark.parametrize("bad", [(1, 1), (2, 0, 0), (3,)])
def test_index_rejects_foreign_states(bad):
    with pytest.raises(FockError):
        basis_index(enumerate_basis(2, 1), bad)


@pytest.mark.parametrize("s, value", [((1, 1, 1), 1), ((3, 0), 6), ((2, 2, 1), 4), ((0, 0), 1)])
def test_occupation_factorial(s, value):
    assert occupation_factorial(s) == value


def test_occupation_factorial_overflow():
    assert occupation_factorial((20,)) == 2432902008176640000
    with pytest.raises(OverflowError):
        occupation_factorial((21,))


def test_submatrix_no_repetition_is_identity_map():
    U = random_unitary(np.random.default_rng(0), 4)
    assert np.array_equal(substitution_submatrix(U, (1, 1, 1, 1), (1, 1, 1, 1)), U)


def test_submatrix_row_repetition():
    U = np.array([[1, 2], [3, 4]], dtype=complex)
    assert np.array_equal(substitution_submatrix(U, (2, 0), (1, 1)), [[1, 2], [1, 2]])


def test_submatrix_empty_sector():
    assert substitution_submatrix(np.eye(3), (0, 0, 0), (0, 0, 0)).shape == (0, 0)


def test_submatrix_photon_mismatch():
    with pytest.raises(FockError):
        substitution_submatrix(np.eye(2), (1, 0), (1, 1))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(1, 3), st.data())
def test_submatrix_adjoint_symmetry(m, n, data):
    b = enumerate_basis(m, n)
    s = b[data.draw(st.integers(0, b.dim - 1))]
    t = b[data.draw(st.integers(0, b.dim - 1))]
    U = random_unitary(np.random.default_rng(data.draw(st.integers(0, 2**31))), m)
    lhs = substitution_submatrix(U, s, t).conj().T
    assert np.array_equal(lhs, substitution_submatrix(U.conj().T, t, s))


def test_occupations_array():
    occ = enumerate_basis(3, 2).occupations()
    assert occ.shape == (6, 3)
    assert occ.dtype == np.int64
    assert np.all(occ.sum(axis=1) == 2)


def test_state_json_round_trip():
    text = state_to_json((2, 0, 1))
    assert json.loads(text) == [2, 0, 1]
    assert state_from_json(text) == (2, 0, 1)
