"""Mixed states on a fixed photon-number sector and the channels acting on them.

Only photon-conserving injections are supported, so every channel here maps
the n-photon sector to itself and density matrices stay dense ``d x d``.
"""

from __future__ import annotations

import itertools
import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .fock import FockBasis, FockState, as_state, basis_index, enumerate_basis
from .lift import LiftedUnitary

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9

_DUMP_MAGIC = b"FKDM"
_DUMP_VERSION = 1


class ChannelError(ValueError):
    pass


class InjectionError(ChannelError):
    pass


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    basis: FockBasis
    matrix: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.matrix, dtype=np.complex128)
        d = self.basis.dim
        if rho.shape != (d, d):
            raise ChannelError(f"matrix shape {rho.shape} does not match basis dim {d}")
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise ChannelError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1.0) > TRACE_TOL:
            raise ChannelError(f"density matrix trace {np.trace(rho).real:.3g} != 1")
        lo = np.linalg.eigvalsh(rho).min()
        if lo < -PSD_TOL:
            raise ChannelError(f"density matrix has eigenvalue {lo:.3g} < 0")
        object.__setattr__(self, "matrix", rho)

    @property
    def dim(self) -> int:
        return self.basis.dim


def fock_density(basis: FockBasis, s) -> DensityMatrix:
    rho = np.zeros((basis.dim, basis.dim), dtype=np.complex128)
    i = basis_index(basis, s)
    rho[i, i] = 1.0
    return DensityMatrix(basis, rho)


def pure_density(basis: FockBasis, psi) -> DensityMatrix:
    psi = np.asarray(psi, dtype=np.complex128)
    psi = psi / np.linalg.norm(psi)
    return DensityMatrix(basis, np.outer(psi, psi.conj()))


def maximally_mixed(basis: FockBasis) -> DensityMatrix:
    return DensityMatrix(basis, np.eye(basis.dim, dtype=np.complex128) / basis.dim)


def random_density(d: int, seed, rank: int | None = None) -> np.ndarray:
    """Random d x d density matrix from a complex Ginibre ``d x rank`` factor."""
    rng = np.random.default_rng(seed)
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def _same_basis(a: FockBasis, b: FockBasis) -> None:
    if (a.modes, a.photons) != (b.modes, b.photons):
        raise ChannelError(f"basis mismatch: ({a.modes}, {a.photons}) vs ({b.modes}, {b.photons})")


def apply_unitary(rho: DensityMatrix, W: LiftedUnitary) -> DensityMatrix:
    _same_basis(rho.basis, W.basis)
    out = W.matrix @ rho.matrix @ W.matrix.conj().T
    return DensityMatrix(rho.basis, 0.5 * (out + out.conj().T))


# --- injection ---------------------------------------------------------------

@dataclass(frozen=True)
class InjectionSpec:
    """Measure ``measured_modes`` and re-inject ``injection(outcome)`` on them.

    ``injection`` maps an outcome tuple (n_1, ..., n_k) to the occupations
    written back on the same modes; it must conserve the photon count.
    """

    measured_modes: tuple[int, ...]
    injection: Callable[[FockState], Sequence[int]] = field(default=None, compare=True)
    label: str = "custom"

    def __post_init__(self):
        modes = tuple(int(x) for x in self.measured_modes)
        if not modes:
            raise InjectionError("an injection needs at least one measured mode")
        if len(set(modes)) != len(modes) or min(modes) < 0:
            raise InjectionError(f"measured modes must be distinct and non-negative: {modes}")
        object.__setattr__(self, "measured_modes", modes)
        if self.injection is None:
            object.__setattr__(self, "injection", _identity)
            object.__setattr__(self, "label", "identity")

    @property
    def k(self) -> int:
        return len(self.measured_modes)


def _identity(outcome: FockState) -> FockState:
    return outcome


def identity_injection(modes: Sequence[int]) -> InjectionSpec:
    """Measure each mode and put back what was found (photon-number dephasing)."""
    return InjectionSpec(tuple(modes), _identity, "identity")


def permutation_injection(modes: Sequence[int], perm: Sequence[int]) -> InjectionSpec:
    """Re-inject the outcome permuted: mode ``i`` receives ``outcome[perm[i]]``."""
    perm = tuple(int(p) for p in perm)
    if sorted(perm) != list(range(len(modes))):
        raise InjectionError(f"{perm} is not a permutation of {len(modes)} slots")

    def permute(outcome: FockState) -> FockState:
        return tuple(outcome[p] for p in perm)

    return InjectionSpec(tuple(modes), permute, f"permutation{list(perm)}")


def reachable_outcomes(k: int, n: int) -> list[FockState]:
    """All k-tuples of non-negative counts with total at most n."""
    return [o for o in itertools.product(range(n + 1), repeat=k) if sum(o) <= n]


def check_conservation(spec: InjectionSpec, n: int) -> None:
    """Raise InjectionError unless f conserves photons on every reachable outcome."""
    for outcome in reachable_outcomes(spec.k, n):
        image = as_state(spec.injection(outcome))
        if len(image) != spec.k:
            raise InjectionError(f"injection of {outcome} returned {len(image)} entries, expected {spec.k}")
        if sum(image) != sum(outcome):
            raise InjectionError(
                f"injection {spec.label} maps {outcome} to {image}: photon count not conserved"
            )


@lru_cache(maxsize=256)
def injection_blocks(spec: InjectionSpec, m: int, n: int) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    """Per-outcome (source, destination) index arrays of the injection isometries."""
    if max(spec.measured_modes) >= m:
        raise InjectionError(f"measured modes {spec.measured_modes} do not fit on {m} modes")
    check_conservation(spec, n)
    basis = enumerate_basis(m, n)
    groups: dict[FockState, list[int]] = {}
    for i, s in enumerate(basis.states):
        groups.setdefault(tuple(s[q] for q in spec.measured_modes), []).append(i)
    blocks = []
    for outcome, src in groups.items():
        image = as_state(spec.injection(outcome))
        dst = []
        for i in src:
            new = list(basis.states[i])
            for q, v in zip(spec.measured_modes, image):
                new[q] = v
            dst.append(basis.index[tuple(new)])
        blocks.append((np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64)))
    return tuple(blocks)


def inject_array(rho: np.ndarray, blocks) -> np.ndarray:
    """Injection channel on a raw matrix; linear, so it also maps derivatives."""
    out = np.zeros_like(rho)
    for src, dst in blocks:
        out[np.ix_(dst, dst)] += rho[np.ix_(src, src)]
    return out


def state_injection(rho: DensityMatrix, spec: InjectionSpec) -> DensityMatrix:
    blocks = injection_blocks(spec, rho.basis.modes, rho.basis.photons)
    return DensityMatrix(rho.basis, inject_array(rho.matrix, blocks))


def outcome_probabilities(rho: DensityMatrix, measured_modes: Sequence[int]) -> dict[FockState, float]:
    """Photon-count statistics on ``measured_modes``: Pr[o] = Tr[Pi_o rho]."""
    modes = tuple(int(q) for q in measured_modes)
    if any(q < 0 or q >= rho.basis.modes for q in modes):
        raise ChannelError(f"measured modes {modes} do not fit on {rho.basis.modes} modes")
    diag = np.real(np.diag(rho.matrix))
    probs: dict[FockState, float] = {}
    for s, p in zip(rho.basis.states, diag):
        key = tuple(s[q] for q in modes)
        probs[key] = probs.get(key, 0.0) + float(p)
    return probs


# --- figures of merit ----------------------------------------------------------

def purity(rho: DensityMatrix) -> float:
    return float(np.sum(np.abs(rho.matrix) ** 2))


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Trace norm ||rho - sigma||_1, in [0, 2] (twice the usual trace distance)."""
    _same_basis(rho.basis, sigma.basis)
    return float(np.sum(np.abs(np.linalg.eigvalsh(rho.matrix - sigma.matrix))))


def sign_observable(rho: DensityMatrix, sigma: DensityMatrix) -> np.ndarray:
    """Observable sum_i sign(lambda_i)|e_i><e_i| built from the spectrum of rho - sigma.

    It has operator norm 1 and ``Tr[O (rho - sigma)]`` equals the trace norm.
    """
    _same_basis(rho.basis, sigma.basis)
    lam, vecs = np.linalg.eigh(rho.matrix - sigma.matrix)
    return (vecs * np.sign(lam)) @ vecs.conj().T


def distinguishability_bound(d: int, gamma: float) -> float:
    """Upper bound 2 sqrt(d) sqrt(gamma - 1/d) on the trace norm between states of purity <= gamma."""
    if d < 1:
        raise ChannelError("dimension must be >= 1")
    if not 1.0 / d - 1e-15 <= gamma <= 1.0 + 1e-15:
        raise ChannelError(f"purity bound {gamma} outside [1/{d}, 1]")
    return 2.0 * math.sqrt(d) * math.sqrt(max(gamma - 1.0 / d, 0.0))


# --- checkpoint dumps --------------------------------------------------------------

def dump_density(rho: DensityMatrix) -> bytes:
    """Binary checkpoint: magic, version, modes, photons, then row-major complex128 LE."""
    header = _DUMP_MAGIC + struct.pack("<III", _DUMP_VERSION, rho.basis.modes, rho.basis.photons)
    return header + np.ascontiguousarray(rho.matrix, dtype="<c16").tobytes(order="C")


def load_density(data: bytes) -> DensityMatrix:
    if data[:4] != _DUMP_MAGIC:
        raise ChannelError("not a density-matrix dump")
    version, m, n = struct.unpack("<III", data[4:16])
    if version != _DUMP_VERSION:
        raise ChannelError(f"unsupported dump version {version}")
    basis = enumerate_basis(m, n)
    arr = np.frombuffer(data[16:], dtype="<c16")
    if arr.size != basis.dim**2:
        raise ChannelError("dump payload does not match its basis descriptor")
    return DensityMatrix(basis, arr.reshape(basis.dim, basis.dim).astype(np.complex128))
