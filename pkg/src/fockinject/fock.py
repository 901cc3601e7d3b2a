"""Fixed-photon-number Fock bases and the combinatorial helpers built on them.

States are plain tuples of non-negative occupations. A :class:`FockBasis`
enumerates every state with exactly ``photons`` photons over ``modes`` modes
in lexicographically descending order, e.g. for two modes and two photons::

    (2, 0), (1, 1), (0, 2)

That ordering is global: lifted unitaries, density matrices and CSV artifacts
all index rows and columns by it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

FockState = tuple[int, ...]

# Factorials and pattern counts must fit a signed 64-bit integer.
INT64_MAX = 2**63 - 1


class FockError(ValueError):
    """Raised for states outside the sector they are used in."""


def as_state(s: Sequence[int]) -> FockState:
    state = tuple(int(x) for x in s)
    if any(x < 0 for x in state):
        raise FockError(f"negative occupation in {state}")
    return state


def photon_count(s: Sequence[int]) -> int:
    return int(sum(s))


def _descending_compositions(m: int, n: int) -> Iterator[FockState]:
    if m == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in _descending_compositions(m - 1, n - first):
            yield (first, *rest)


def basis_size(m: int, n: int) -> int:
    """Number of weak compositions of ``n`` into ``m`` parts, C(m+n-1, n)."""
    if m < 1:
        raise FockError("a basis needs at least one mode")
    size = math.comb(m + n - 1, n)
    if size > INT64_MAX:
        raise OverflowError(f"basis size for m={m}, n={n} overflows int64")
    return size


@dataclass(frozen=True)
class FockBasis:
    """Ordered basis of the ``photons``-photon sector on ``modes`` modes."""

    modes: int
    photons: int
    states: tuple[FockState, ...] = field(repr=False)
    index: dict[FockState, int] = field(repr=False, compare=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, k: int) -> FockState:
        return self.states[k]

    def __iter__(self) -> Iterator[FockState]:
        return iter(self.states)

    def occupations(self) -> np.ndarray:
        """States as a ``(dim, modes)`` integer array, rows in basis order."""
        return np.array(self.states, dtype=np.int64).reshape(self.dim, self.modes)


_BASIS_CACHE: dict[tuple[int, int], FockBasis] = {}


def enumerate_basis(m: int, n: int) -> FockBasis:
    """Return the complete n-photon, m-mode basis, lexicographically descending."""
    if m < 1:
        raise FockError(f"modes must be >= 1, got {m}")
    if n < 0:
        raise FockError(f"photons must be >= 0, got {n}")
    key = (m, n)
    cached = _BASIS_CACHE.get(key)
    if cached is not None:
        return cached
    states = tuple(_descending_compositions(m, n))
    basis = FockBasis(m, n, states, {s: i for i, s in enumerate(states)})
    _BASIS_CACHE[key] = basis
    return basis


def basis_index(basis: FockBasis, s: Sequence[int]) -> int:
    state = as_state(s)
    if len(state) != basis.modes:
        raise FockError(f"state {state} has {len(state)} modes, basis has {basis.modes}")
    if photon_count(state) != basis.photons:
        raise FockError(
            f"state {state} carries {photon_count(state)} photons, sector has {basis.photons}"
        )
    return basis.index[state]


def occupation_factorial(s: Sequence[int]) -> int:
    """Exact s! = prod_i s_i!; raises OverflowError beyond the int64 range."""
    out = 1
    for x in as_state(s):
        out *= math.factorial(x)
        if out > INT64_MAX:
            raise OverflowError(f"occupation factorial of {tuple(s)} overflows int64")
    return out


def repeated_indices(s: Sequence[int]) -> np.ndarray:
    """Mode indices with multiplicity, e.g. (2, 0, 1) -> [0, 0, 2]."""
    return np.repeat(np.arange(len(s)), np.asarray(s, dtype=np.int64)).astype(np.int64)


def substitution_submatrix(U: np.ndarray, s: Sequence[int], t: Sequence[int]) -> np.ndarray:
    """Build the |s| x |t| matrix with row i of U repeated s_i times and column j t_j times.

    This is the matrix whose permanent gives the ``<s|phi(U)|t>`` amplitude up
    to the sqrt(s! t!) normalisation.
    """
    U = np.asarray(U)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise FockError(f"expected a square matrix, got shape {U.shape}")
    s, t = as_state(s), as_state(t)
    if len(s) != U.shape[0] or len(t) != U.shape[1]:
        raise FockError(f"states {s}, {t} do not match a {U.shape[0]}-mode matrix")
    if photon_count(s) != photon_count(t):
        raise FockError(f"photon count mismatch: |{s}| != |{t}|")
    rows, cols = repeated_indices(s), repeated_indices(t)
    return U[np.ix_(rows, cols)]


def state_to_json(s: Sequence[int]) -> str:
    return json.dumps(list(as_state(s)))


def state_from_json(text: str) -> FockState:
    data = json.loads(text)
    if not isinstance(data, list) or not all(isinstance(x, int) for x in data):
        raise FockError(f"a Fock state is a JSON array of integers, got {text!r}")
    return as_state(data)
