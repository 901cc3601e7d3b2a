"""Matrix permanents: Glynn exact kernel, brute-force oracle, Gurvits estimator.

The exact kernel walks the 2**(n-1) sign vectors of Glynn's formula in Gray
code order, so each step updates the column sums with one row in O(n) and the
whole evaluation costs O(2**n * n). The complex accumulator uses Kahan
summation; cancellation becomes visible around n = 14 without it.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

try:
    import numba as _nb
except ModuleNotFoundError:  # pragma: no cover - numba is a declared dependency
    _nb = None

PERMANENT_CAP = 20
NAIVE_CAP = 9
GURVITS_CHUNK = 1 << 15


class PermanentError(ValueError):
    pass


def _glynn_gray(a: np.ndarray) -> complex:
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    if n == 1:
        return a[0, 0]
    colsum = np.zeros(n, dtype=np.complex128)
    for j in range(n):
        acc = 0.0 + 0.0j
        for i in range(n):
            acc += a[i, j]
        colsum[j] = acc
    delta = np.ones(n, dtype=np.int64)

    prod = 1.0 + 0.0j
    for j in range(n):
        prod *= colsum[j]
    total = prod
    comp = 0.0 + 0.0j
    sign = 1.0

    gray = 0
    for k in range(1, 1 << (n - 1)):
        new_gray = k ^ (k >> 1)
        diff = gray ^ new_gray
        gray = new_gray
        # flipped bit b toggles delta of row b + 1; row 0 stays +1
        b = 0
        while (diff >> b) & 1 == 0:
            b += 1
        row = b + 1
        factor = -2.0 * delta[row]
        for j in range(n):
            colsum[j] += factor * a[row, j]
        delta[row] = -delta[row]
        sign = -sign

        prod = 1.0 + 0.0j
        for j in range(n):
            prod *= colsum[j]
        term = sign * prod - comp
        t = total + term
        comp = (t - total) - term
        total = t
    return total / (1 << (n - 1))


if _nb is not None:
    _glynn_kernel = _nb.njit(cache=True, nogil=True)(_glynn_gray)
else:  # pragma: no cover
    _glynn_kernel = _glynn_gray


def _as_square(A, cap: int, what: str) -> np.ndarray:
    a = np.asarray(A, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise PermanentError(f"{what}: expected a square matrix, got shape {a.shape}")
    if a.shape[0] > cap:
        raise PermanentError(f"{what}: size {a.shape[0]} exceeds cap {cap}")
    return np.ascontiguousarray(a)


def permanent_exact(A, cap: int = PERMANENT_CAP) -> complex:
    """Permanent of a square complex matrix via Gray-code Glynn.

    Parameters
    ----------
    A : array_like
        ``n x n`` matrix, ``n <= cap``. The empty matrix has permanent 1.
    cap : int
        Hard size limit; the cost doubles with every extra row.
    """
    a = _as_square(A, cap, "permanent_exact")
    return complex(_glynn_kernel(a))


def permanent_naive(A) -> complex:
    """Permanent by summing over all n! permutations; test oracle only."""
    a = _as_square(A, NAIVE_CAP, "permanent_naive")
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    return complex(a[np.arange(n), perms].prod(axis=1).sum())


def permanent_ryser(A) -> complex:
    """Ryser's inclusion-exclusion formula, O(2**n * n**2); second exact route."""
    a = _as_square(A, PERMANENT_CAP, "permanent_ryser")
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    total = 0.0 + 0.0j
    for size in range(1, n + 1):
        sign = (-1) ** (n - size)
        for cols in itertools.combinations(range(n), size):
            total += sign * np.prod(a[:, cols].sum(axis=1))
    return complex(total)


@dataclass(frozen=True)
class PermanentEstimate:
    """Sample mean of the Glynn estimator with its empirical standard error."""

    value: complex
    samples: int
    empirical_std_error: float
    # unbiased estimate of E|X - per|^2, used for squared-modulus bias correction
    variance: float = 0.0

    def __post_init__(self):
        if self.samples < 1:
            raise PermanentError("an estimate needs at least one sample")
        if self.empirical_std_error < 0:
            raise PermanentError("standard error must be non-negative")


def _chunk_stats(a: np.ndarray, count: int, seed_seq: np.random.SeedSequence):
    rng = np.random.default_rng(seed_seq)
    n = a.shape[0]
    x = rng.integers(0, 2, size=(count, n), dtype=np.int8).astype(np.float64) * 2.0 - 1.0
    vals = np.prod(x, axis=1) * np.prod(x @ a, axis=1)
    mean = vals.mean()
    m2 = float(np.sum(np.abs(vals - mean) ** 2))
    return count, mean, m2


def gurvits_estimate(A, samples: int, seed, workers: int = 1) -> PermanentEstimate:
    """Unbiased randomized permanent estimate (Gurvits, Glynn polarisation).

    Each sample draws x uniformly from {-1, +1}^n and evaluates
    ``prod(x) * prod(x @ A)``. Samples are split into fixed-size chunks, each
    with its own stream spawned from ``seed``; chunk statistics are merged in
    chunk order, so the result does not depend on ``workers``.

    The additive error is of order ``||A||**n / sqrt(samples)``.
    """
    if samples < 1:
        raise PermanentError("samples must be >= 1")
    a = np.asarray(A, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise PermanentError(f"gurvits_estimate: expected a square matrix, got shape {a.shape}")
    if a.shape[0] == 0:
        return PermanentEstimate(1.0 + 0.0j, samples, 0.0, 0.0)

    n_chunks = math.ceil(samples / GURVITS_CHUNK)
    sizes = [GURVITS_CHUNK] * (n_chunks - 1) + [samples - GURVITS_CHUNK * (n_chunks - 1)]
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    jobs = list(zip(sizes, streams))
    if workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: _chunk_stats(a, *job), jobs))
    else:
        parts = [_chunk_stats(a, *job) for job in jobs]

    # Chan et al. pairwise merge, always in chunk order
    count, mean, m2 = parts[0]
    for c, mu, q in parts[1:]:
        total = count + c
        delta = mu - mean
        mean = mean + delta * (c / total)
        m2 = m2 + q + abs(delta) ** 2 * count * c / total
        count = total

    variance = m2 / (count - 1) if count > 1 else 0.0
    std_error = math.sqrt(variance / count)
    return PermanentEstimate(complex(mean), int(count), float(std_error), float(variance))
