import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fockinject.circuit import haar_unitary
from fockinject.permanent import (
    PermanentError,
    PermanentEstimate,
    gurvits_estimate,
    permanent_exact,
    permanent_naive,
    permanent_ryser,
)
from oracles import permutation_matrix, random_complex


def per_by_definition(A):
    n = A.shape[0]
    return sum(math.prod(A[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n)))


def test_identity():
    assert permanent_exact(np.eye(3)) == pytest.approx(1.0)
    assert permanent_naive(np.eye(2)) == pytest.approx(1.0)


def test_all_ones():
    assert permanent_exact(np.ones((3, 3))) == pytest.approx(6.0)
    assert permanent_exact(np.ones((6, 6))) == pytest.approx(720.0)


def test_empty_matrix():
    assert permanent_exact(np.zeros((0, 0))) == 1.0
    assert permanent_naive(np.zeros((0, 0))) == 1.0


def test_two_by_two():
    a, b, c, d = 1 + 2j, -0.5j, 3.0, 0.25 - 1j
    assert np.isclose(permanent_exact([[a, b], [c, d]]), a * d + b * c)


@pytest.mark.parametrize("n", range(1, 8))
def test_three_routes_agree(n):
    rng = np.random.default_rng(100 + n)
    for _ in range(5):
        A = random_complex(rng, n)
        ref = per_by_definition(A)
        for value in (permanent_exact(A), permanent_naive(A), permanent_ryser(A)):
            assert abs(value - ref) <= 1e-12 * max(1.0, abs(ref))


def test_random_five_by_five_relative():
    A = random_complex(np.random.default_rng(5), 5)
    ex, nv = permanent_exact(A), permanent_naive(A)
    assert abs(ex - nv) / abs(nv) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31), st.permutations(range(6)), st.permutations(range(6)))
def test_invariant_under_permutations(n, seed, p, q):
    A = random_complex(np.random.default_rng(seed), n)
    P = permutation_matrix([x for x in p if x < n])
    Q = permutation_matrix([x for x in q if x < n])
    ref = permanent_exact(A)
    assert abs(permanent_exact(P @ A @ Q) - ref) <= 1e-10 * max(1.0, abs(ref))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31), st.complex_numbers(min_magnitude=0.1, max_magnitude=3))
def test_homogeneity(n, seed, c):
    A = random_complex(np.random.default_rng(seed), n)
    lhs = permanent_exact(c * A)
    rhs = c**n * permanent_exact(A)
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(rhs))


def test_rejects_non_square():
    with pytest.raises(PermanentError):
        permanent_exact(np.ones((2, 3)))


def test_rejects_above_cap():
    with pytest.raises(PermanentError):
        permanent_exact(np.eye(21))
    with pytest.raises(PermanentError):
        permanent_naive(np.eye(10))
    with pytest.raises(PermanentError):
        permanent_exact(np.eye(6), cap=5)


def test_gurvits_zero_matrix_exact():
    est = gurvits_estimate(np.zeros((4, 4)), 1000, seed=1)
    assert est.value == 0
    assert est.empirical_std_error == 0


def test_gurvits_identity():
    est = gurvits_estimate(np.eye(3), 100_000, seed=3)
    assert abs(est.value - 1.0) <= 5 * est.empirical_std_error + 1e-12


def test_gurvits_rejects_zero_samples():
    with pytest.raises(PermanentError):
        gurvits_estimate(np.eye(2), 0, seed=0)


def test_gurvits_bit_reproducible_and_worker_independent():
    U = haar_unitary(5, 11)
    a = gurvits_estimate(U, 70_000, seed=9)
    b = gurvits_estimate(U, 70_000, seed=9)
    c = gurvits_estimate(U, 70_000, seed=9, workers=3)
    assert a == b == c
    assert gurvits_estimate(U, 70_000, seed=10).value != a.value


def test_gurvits_std_error_scaling():
    U = haar_unitary(6, 4)
    small = gurvits_estimate(U, 10_000, seed=1)
    large = gurvits_estimate(U, 1_000_000, seed=2)
    ratio = small.empirical_std_error / large.empirical_std_error
    assert 8.0 <= ratio <= 12.5


def test_gurvits_additive_error_bound():
    # ||U|| = 1, so the error scale is 1/sqrt(samples)
    rng = np.random.default_rng(77)
    samples, hits, trials = 4000, 0, 100
    for i in range(trials):
        U = haar_unitary(4, rng)
        est = gurvits_estimate(U, samples, seed=i)
        hits += abs(est.value - permanent_exact(U)) <= 5 / math.sqrt(samples)
    assert hits >= 99


def test_estimate_validation():
    with pytest.raises(ValueError):
        PermanentEstimate(1.0, 0, 0.1)
    with pytest.raises(ValueError):
        PermanentEstimate(1.0, 10, -0.1)
