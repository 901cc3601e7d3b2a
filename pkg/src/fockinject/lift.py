"""Lifting single-photon unitaries to the n-photon sector.

Entry (s, t) of the lifted unitary is ``per(U[s-rows, t-cols]) / sqrt(s! t!)``,
rows picked by the output occupation ``s`` and columns by the input ``t``.
With this convention a photon entering mode j leaves in mode i with amplitude
``U[i, j]`` and ``lift(U @ V) == lift(U) @ lift(V)``.

Derivatives go through the Lie-algebra representation instead of
differentiating permanents: ``d lift(U)[dU] = lift(U) @ algebra_lift(U^-1 dU)``
where ``algebra_lift(X) = sum_ij X_ij a_i^dagger a_j`` on the sector.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fock import FockBasis, FockError, basis_index, enumerate_basis, occupation_factorial
from .permanent import PERMANENT_CAP, _glynn_kernel, _nb

MAX_LIFT_DIM = 20_000


class LiftError(ValueError):
    pass


def _lift_entries(U, occ, norms, rows, cols):
    n = 0
    for k in range(occ.shape[1]):
        n += occ[0, k]
    out = np.empty(rows.shape[0], dtype=np.complex128)
    ri = np.empty(n, dtype=np.int64)
    ci = np.empty(n, dtype=np.int64)
    sub = np.empty((n, n), dtype=np.complex128)
    for e in range(rows.shape[0]):
        s = rows[e]
        t = cols[e]
        p = 0
        for k in range(occ.shape[1]):
            for _ in range(occ[s, k]):
                ri[p] = k
                p += 1
        p = 0
        for k in range(occ.shape[1]):
            for _ in range(occ[t, k]):
                ci[p] = k
                p += 1
        for a in range(n):
            for b in range(n):
                sub[a, b] = U[ri[a], ci[b]]
        out[e] = _glynn_kernel(sub) / (norms[s] * norms[t])
    return out


if _nb is not None:
    _lift_entries = _nb.njit(cache=True, nogil=True)(_lift_entries)


@dataclass(frozen=True)
class LiftedUnitary:
    basis: FockBasis
    matrix: np.ndarray

    def __post_init__(self):
        d = self.basis.dim
        if self.matrix.shape != (d, d):
            raise LiftError(f"matrix shape {self.matrix.shape} does not match basis dim {d}")


@lru_cache(maxsize=64)
def _sector_tables(m: int, n: int):
    basis = enumerate_basis(m, n)
    occ = np.ascontiguousarray(basis.occupations())
    norms = np.sqrt(np.array([float(occupation_factorial(s)) for s in basis.states]))
    return occ, norms


def _check_sector(U: np.ndarray, basis: FockBasis) -> np.ndarray:
    U = np.ascontiguousarray(np.asarray(U, dtype=np.complex128))
    if U.shape != (basis.modes, basis.modes):
        raise LiftError(f"unitary of shape {U.shape} does not act on {basis.modes} modes")
    if basis.photons > PERMANENT_CAP:
        raise LiftError(f"{basis.photons} photons exceed the permanent cap {PERMANENT_CAP}")
    if basis.dim > MAX_LIFT_DIM:
        raise LiftError(f"sector dimension {basis.dim} exceeds {MAX_LIFT_DIM}")
    return U


def lift_matrix(U, basis: FockBasis) -> np.ndarray:
    """Dense lifted matrix as a plain array."""
    U = _check_sector(U, basis)
    d = basis.dim
    if basis.photons == 0:
        return np.ones((1, 1), dtype=np.complex128)
    occ, norms = _sector_tables(basis.modes, basis.photons)
    rows, cols = np.divmod(np.arange(d * d, dtype=np.int64), d)
    return _lift_entries(U, occ, norms, rows, cols).reshape(d, d)


def lift_unitary(U, basis: FockBasis) -> LiftedUnitary:
    return LiftedUnitary(basis, lift_matrix(U, basis))


def lift_column(U, basis: FockBasis, t) -> np.ndarray:
    """Amplitudes ``<s|lift(U)|t>`` for every basis state s (one column)."""
    U = _check_sector(U, basis)
    j = basis_index(basis, t)
    if basis.photons == 0:
        return np.ones(1, dtype=np.complex128)
    occ, norms = _sector_tables(basis.modes, basis.photons)
    rows = np.arange(basis.dim, dtype=np.int64)
    return _lift_entries(U, occ, norms, rows, np.full_like(rows, j))


def lift_amplitude(U, s, t) -> complex:
    """Single amplitude ``<s|lift(U)|t>``."""
    m = np.shape(U)[0]
    n = int(sum(t))
    if int(sum(s)) != n:
        raise FockError(f"photon count mismatch between {tuple(s)} and {tuple(t)}")
    basis = enumerate_basis(m, n)
    U = _check_sector(U, basis)
    if n == 0:
        return 1.0 + 0.0j
    occ, norms = _sector_tables(m, n)
    i, j = basis_index(basis, s), basis_index(basis, t)
    return complex(_lift_entries(U, occ, norms, np.array([i]), np.array([j]))[0])


def transition_probability(U, t, s) -> float:
    """Probability that input occupation ``t`` leaves as ``s``: |per|^2 / (s! t!)."""
    return abs(lift_amplitude(U, s, t)) ** 2


def output_distribution(U, t) -> tuple[FockBasis, np.ndarray]:
    """All output probabilities for input ``t``, in basis order."""
    basis = enumerate_basis(np.shape(U)[0], int(sum(t)))
    return basis, np.abs(lift_column(U, basis, t)) ** 2


def apply_to_vector(W: LiftedUnitary, psi, atol: float = 1e-10) -> np.ndarray:
    psi = np.asarray(psi, dtype=np.complex128)
    if psi.shape != (W.basis.dim,):
        raise LiftError(f"vector of shape {psi.shape} does not match dim {W.basis.dim}")
    if abs(np.linalg.norm(psi) - 1.0) > atol:
        raise LiftError("input vector is not normalised")
    return W.matrix @ psi


@lru_cache(maxsize=64)
def _hopping_table(m: int, n: int):
    """Sparse entries of a_i^dagger a_j on the sector, flattened over (i, j)."""
    basis = enumerate_basis(m, n)
    rows, cols, pair, coef = [], [], [], []
    for c, s in enumerate(basis.states):
        for j in range(m):
            if s[j] == 0:
                continue
            for i in range(m):
                if i == j:
                    rows.append(c)
                    cols.append(c)
                    coef.append(float(s[j]))
                else:
                    new = list(s)
                    new[j] -= 1
                    new[i] += 1
                    rows.append(basis.index[tuple(new)])
                    cols.append(c)
                    coef.append(np.sqrt(s[j] * (s[i] + 1.0)))
                pair.append(i * m + j)
    return (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64),
            np.array(pair, dtype=np.int64), np.array(coef))


def algebra_lift(X, basis: FockBasis) -> np.ndarray:
    """Second-quantised ``sum_ij X_ij a_i^dagger a_j`` restricted to the sector."""
    X = np.asarray(X, dtype=np.complex128)
    if X.shape != (basis.modes, basis.modes):
        raise LiftError(f"generator of shape {X.shape} does not act on {basis.modes} modes")
    d = basis.dim
    out = np.zeros((d, d), dtype=np.complex128)
    if basis.photons == 0:
        return out
    rows, cols, pair, coef = _hopping_table(basis.modes, basis.photons)
    np.add.at(out, (rows, cols), X.reshape(-1)[pair] * coef)
    return out


def lift_derivative(U, dU, basis: FockBasis, lifted: np.ndarray | None = None) -> np.ndarray:
    """Directional derivative of ``lift`` at U along dU.

    Pass ``lifted`` to reuse an already computed ``lift_matrix(U, basis)``.
    """
    U = np.asarray(U, dtype=np.complex128)
    if lifted is None:
        lifted = lift_matrix(U, basis)
    X = np.linalg.solve(U, np.asarray(dU, dtype=np.complex128))
    return lifted @ algebra_lift(X, basis)
