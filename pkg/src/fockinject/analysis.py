"""Controllability and purity experiments on linear-optics + injection pipelines.

The output state of a pipeline is differentiated in forward mode: alongside
rho we carry one derivative matrix per parameter. A unitary stage conjugates
every derivative and adds the product-rule terms for its own parameters,

    d(W rho W^dag) = W (d rho) W^dag + (dW) rho W^dag + W rho (dW)^dag,

and an injection stage, being linear in rho, maps each derivative exactly as
it maps rho. No automatic differentiation or finite differences are involved.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .channel import InjectionSpec, identity_injection, inject_array, injection_blocks
from .circuit import (
    ParamCircuit,
    gate_generator_matrix,
    gate_matrix,
    haar_unitary,
    single_photon_jacobian,
    single_photon_unitary,
    universal_mesh,
    with_random_beamsplitters,
)
from .fock import FockBasis, as_state, basis_index, enumerate_basis
from .lift import algebra_lift, lift_column, lift_matrix

DEFAULT_RANK_TOL = 1e-7

Stage = Union[ParamCircuit, InjectionSpec]


class PipelineError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineCircuit:
    """Linear-optical blocks interleaved with injections, fed a Fock state.

    Each block owns a contiguous range of the global parameter vector, in
    stage order.
    """

    modes: int
    photons: int
    stages: tuple[Stage, ...]
    input_state: tuple[int, ...]

    def __post_init__(self):
        state = as_state(self.input_state)
        object.__setattr__(self, "input_state", state)
        object.__setattr__(self, "stages", tuple(self.stages))
        if len(state) != self.modes or sum(state) != self.photons:
            raise PipelineError(f"input {state} is not an {self.photons}-photon state on {self.modes} modes")
        for st in self.stages:
            if isinstance(st, ParamCircuit):
                if st.modes != self.modes:
                    raise PipelineError(f"block on {st.modes} modes in a {self.modes}-mode pipeline")
            elif isinstance(st, InjectionSpec):
                if max(st.measured_modes) >= self.modes:
                    raise PipelineError(f"injection on modes {st.measured_modes} outside {self.modes} modes")
            else:
                raise PipelineError(f"unsupported stage {st!r}")

    @property
    def basis(self) -> FockBasis:
        return enumerate_basis(self.modes, self.photons)

    @property
    def parameter_count(self) -> int:
        return sum(st.parameter_count for st in self.stages if isinstance(st, ParamCircuit))

    @property
    def has_injection(self) -> bool:
        return any(isinstance(st, InjectionSpec) for st in self.stages)

    def offsets(self) -> list[int]:
        out, o = [], 0
        for st in self.stages:
            out.append(o)
            if isinstance(st, ParamCircuit):
                o += st.parameter_count
        return out

    def without_injections(self) -> "PipelineCircuit":
        kept = tuple(st for st in self.stages if isinstance(st, ParamCircuit))
        return PipelineCircuit(self.modes, self.photons, kept, self.input_state)


@dataclass(frozen=True)
class DoFReport:
    theta: np.ndarray
    singular_values: np.ndarray
    rank: int
    tolerance: float


@dataclass(frozen=True)
class CurvePoint:
    gate_count: int
    rank: int
    kind: str  # "start", "gate" or "injection"


def _theta(pc: PipelineCircuit, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if theta.size != pc.parameter_count:
        raise PipelineError(f"expected {pc.parameter_count} parameters, got {theta.size}")
    return theta


def _input_rho(pc: PipelineCircuit) -> np.ndarray:
    basis = pc.basis
    rho = np.zeros((basis.dim, basis.dim), dtype=np.complex128)
    i = basis_index(basis, pc.input_state)
    rho[i, i] = 1.0
    return rho


def _conjugate(W: np.ndarray, x: np.ndarray) -> np.ndarray:
    return W @ x @ W.conj().T


def output_state(pc: PipelineCircuit, theta) -> np.ndarray:
    """Output density matrix of the pipeline as a raw array."""
    theta = _theta(pc, theta)
    basis = pc.basis
    rho = _input_rho(pc)
    for st, off in zip(pc.stages, pc.offsets()):
        if isinstance(st, ParamCircuit):
            U = single_photon_unitary(st, theta[off:off + st.parameter_count])
            rho = _conjugate(lift_matrix(U, basis), rho)
        else:
            rho = inject_array(rho, injection_blocks(st, pc.modes, pc.photons))
    return rho


def _propagate(pc: PipelineCircuit, theta):
    """Output state and its exact derivatives, one block at a time."""
    theta = _theta(pc, theta)
    basis = pc.basis
    p = pc.parameter_count
    rho = _input_rho(pc)
    drho = np.zeros((p, basis.dim, basis.dim), dtype=np.complex128)
    for st, off in zip(pc.stages, pc.offsets()):
        if isinstance(st, InjectionSpec):
            blocks = injection_blocks(st, pc.modes, pc.photons)
            rho = inject_array(rho, blocks)
            for a in range(p):
                drho[a] = inject_array(drho[a], blocks)
            continue
        local = theta[off:off + st.parameter_count]
        U = single_photon_unitary(st, local)
        W = lift_matrix(U, basis)
        Wh = W.conj().T
        drho = W @ drho @ Wh
        rho_Wh = rho @ Wh
        for a, dU in enumerate(single_photon_jacobian(st, local)):
            dW = W @ algebra_lift(U.conj().T @ dU, basis)
            term = dW @ rho_Wh
            drho[off + a] += term + term.conj().T
        rho = W @ rho_Wh
    return rho, drho


def realify(drho: np.ndarray) -> np.ndarray:
    """Stack derivative matrices into the real ``2 d^2 x p`` Jacobian.

    Each matrix is flattened column by column and every complex entry becomes
    the pair (real, imag).
    """
    p = drho.shape[0]
    if p == 0:
        d = drho.shape[1] if drho.ndim == 3 else 0
        return np.zeros((2 * d * d, 0))
    cols = drho.transpose(0, 2, 1).reshape(p, -1)
    return np.stack([cols.real, cols.imag], axis=-1).reshape(p, -1).T.copy()


def state_jacobian(pc: PipelineCircuit, theta) -> np.ndarray:
    _, drho = _propagate(pc, theta)
    if drho.shape[0] == 0:
        return np.zeros((2 * pc.basis.dim ** 2, 0))
    return realify(drho)


def numerical_rank(J: np.ndarray, tolerance: float = DEFAULT_RANK_TOL) -> tuple[int, np.ndarray]:
    """Rank as the number of singular values above ``tolerance * sigma_max``."""
    if J.size == 0:
        return 0, np.zeros(0)
    sv = np.linalg.svd(J, compute_uv=False)
    if sv[0] == 0.0:
        return 0, sv
    return int(np.count_nonzero(sv > tolerance * sv[0])), sv


def dof_at(pc: PipelineCircuit, theta, tolerance: float = DEFAULT_RANK_TOL) -> DoFReport:
    if not 0.0 < tolerance < 1.0:
        raise PipelineError(f"rank tolerance must lie in (0, 1), got {tolerance}")
    theta = _theta(pc, theta)
    rank, sv = numerical_rank(state_jacobian(pc, theta), tolerance)
    return DoFReport(theta, sv, rank, tolerance)


def sample_theta(pc: PipelineCircuit, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.0, 2.0 * math.pi, size=pc.parameter_count)


def dof_trials(pc: PipelineCircuit, trials: int, seed, tolerance: float = DEFAULT_RANK_TOL,
               workers: int = 1) -> list[DoFReport]:
    if trials < 1:
        raise PipelineError("trials must be >= 1")
    streams = np.random.SeedSequence(seed).spawn(trials)

    def one(ss):
        return dof_at(pc, sample_theta(pc, np.random.default_rng(ss)), tolerance)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, streams))
    return [one(ss) for ss in streams]


def dof_max(pc: PipelineCircuit, trials: int, seed, tolerance: float = DEFAULT_RANK_TOL,
            workers: int = 1) -> int:
    """Largest Jacobian rank over uniformly drawn parameter points.

    One generic draw already attains the maximum almost surely; disagreement
    between draws is reported as a warning.
    """
    ranks = [r.rank for r in dof_trials(pc, trials, seed, tolerance, workers)]
    if len(set(ranks)) > 1:
        warnings.warn(f"Jacobian rank differs across draws: {ranks}", RuntimeWarning, stacklevel=2)
    return max(ranks)


def dof_curve(pc: PipelineCircuit, theta_seed, tolerance: float = DEFAULT_RANK_TOL) -> list[CurvePoint]:
    """Rank of the intermediate state after every gate and every injection.

    Parameters of gates not yet applied contribute zero columns, so the rank
    of stage ``i`` counts the directions explored by the first ``i`` stages.
    """
    rng = np.random.default_rng(theta_seed)
    theta = sample_theta(pc, rng)
    basis = pc.basis
    p = pc.parameter_count
    rho = _input_rho(pc)
    drho = np.zeros((p, basis.dim, basis.dim), dtype=np.complex128)
    points = [CurvePoint(0, 0, "start")]
    gates_done = 0
    for st, off in zip(pc.stages, pc.offsets()):
        if isinstance(st, InjectionSpec):
            blocks = injection_blocks(st, pc.modes, pc.photons)
            rho = inject_array(rho, blocks)
            for a in range(p):
                drho[a] = inject_array(drho[a], blocks)
            points.append(CurvePoint(gates_done, numerical_rank(realify(drho), tolerance)[0], "injection"))
            continue
        for g in st.gates:
            value = theta[off + g.slot] if g.slot is not None else g.fixed
            W = lift_matrix(gate_matrix(g, value, pc.modes), basis)
            Wh = W.conj().T
            drho = W @ drho @ Wh
            rho = W @ rho @ Wh
            if g.slot is not None:
                # d lift(G) = lift(G) Gamma(K) = Gamma(K) lift(G): K commutes with G
                term = algebra_lift(gate_generator_matrix(g, pc.modes), basis) @ rho
                drho[off + g.slot] += term + term.conj().T
            gates_done += 1
            points.append(CurvePoint(gates_done, numerical_rank(realify(drho), tolerance)[0], "gate"))
    return points


def layered_mesh_pipeline(m: int = 6, n: int = 3, injections: int = 2, extra_beamsplitters: int = 5,
                  seed=0, measured_mode: int = 0, with_injection: bool = True) -> PipelineCircuit:
    """Universal real-rotation blocks (plus a few random beam-splitters) split by identity injections.

    All photons start in mode 0. Block placements depend only on ``seed``, so
    the variants with and without injections share identical blocks.
    """
    streams = np.random.SeedSequence(seed).spawn(injections + 1)
    stages: list[Stage] = []
    for b in range(injections + 1):
        block = with_random_beamsplitters(universal_mesh(m), extra_beamsplitters, streams[b])
        stages.append(block)
        if b < injections and with_injection:
            stages.append(identity_injection([measured_mode]))
    return PipelineCircuit(m, n, tuple(stages), (n,) + (0,) * (m - 1))


# --- purity and collision statistics ------------------------------------------------

def default_input(m: int, n: int) -> tuple[int, ...]:
    """One photon in each of the first n modes, or all photons in mode 0 when n > m."""
    if n <= m:
        return (1,) * n + (0,) * (m - n)
    return (n,) + (0,) * (m - 1)


@dataclass
class PurityReport:
    modes: int
    photons: int
    layers: int
    purities: np.ndarray
    first_layer_sum_sq: np.ndarray
    worst_case_bound: float
    haar_bound: float | None
    mean: float = field(init=False)
    std_error: float = field(init=False)

    def __post_init__(self):
        self.mean = float(np.mean(self.purities))
        k = self.purities.size
        self.std_error = float(np.std(self.purities, ddof=1) / math.sqrt(k)) if k > 1 else 0.0

    @property
    def worst_case_ok(self) -> bool:
        return bool(np.all(self.purities >= self.worst_case_bound))

    @property
    def haar_ok(self) -> bool | None:
        if self.haar_bound is None:
            return None
        return self.mean >= self.haar_bound - 3.0 * self.std_error


def worst_case_purity_bound(n: int, layers: int) -> float:
    return 1.0 / (n + 1) ** layers


def haar_purity_bound(m: int, n: int, layers: int) -> float | None:
    """Mean-purity lower bound for Haar blocks, defined only when m > 2 n^2."""
    if m <= 2 * n * n:
        return None
    return ((m - 2 * n * n) / (math.sqrt(2.0) * m)) ** (2 * layers)


def _purity_trial(m, n, layers, t, measured_mode, ss):
    rng = np.random.default_rng(ss)
    basis = enumerate_basis(m, n)
    blocks = injection_blocks(_identity_spec(measured_mode), m, n)
    rho = np.zeros((basis.dim, basis.dim), dtype=np.complex128)
    i = basis_index(basis, t)
    rho[i, i] = 1.0
    first = None
    for layer in range(layers):
        rho = _conjugate(lift_matrix(haar_unitary(m, rng), basis), rho)
        if layer == 0:
            diag = np.real(np.diag(rho))
            first = sum(float(np.sum(diag[src])) ** 2 for src, _ in blocks)
        rho = inject_array(rho, blocks)
    return float(np.sum(np.abs(rho) ** 2)), first


def _identity_spec(mode: int) -> InjectionSpec:
    return identity_injection([mode])


def purity_bound_experiment(m: int, n: int, layers: int, trials: int, seed,
                            input_state: Sequence[int] | None = None, measured_mode: int = 0,
                            workers: int = 1) -> PurityReport:
    """Purity after ``layers`` rounds of (Haar block, identity injection on one mode).

    Compares every sample with the worst-case bound 1/(n+1)^L and, when
    m > 2 n^2, the sample mean with the no-collision bound.
    """
    if layers < 1:
        raise PipelineError("at least one injection layer is required")
    t = as_state(input_state) if input_state is not None else default_input(m, n)
    streams = np.random.SeedSequence(seed).spawn(trials)

    def one(ss):
        return _purity_trial(m, n, layers, t, measured_mode, ss)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, streams))
    else:
        results = [one(ss) for ss in streams]
    return PurityReport(
        m, n, layers,
        np.array([r[0] for r in results]),
        np.array([r[1] for r in results]),
        worst_case_purity_bound(n, layers),
        haar_purity_bound(m, n, layers),
    )


@dataclass
class BirthdayReport:
    modes: int
    photons: int
    collision_probabilities: np.ndarray
    bound: float
    mean: float = field(init=False)
    std_error: float = field(init=False)

    def __post_init__(self):
        self.mean = float(np.mean(self.collision_probabilities))
        k = self.collision_probabilities.size
        self.std_error = (float(np.std(self.collision_probabilities, ddof=1) / math.sqrt(k))
                          if k > 1 else 0.0)

    @property
    def ok(self) -> bool:
        return self.mean < self.bound


def collision_probability(U: np.ndarray, t: Sequence[int]) -> float:
    """Probability that some output mode holds two or more photons."""
    basis = enumerate_basis(np.shape(U)[0], int(sum(t)))
    probs = np.abs(lift_column(U, basis, t)) ** 2
    bunched = basis.occupations().max(axis=1) > 1
    return float(np.sum(probs[bunched]))


def birthday_check(m: int, n: int, samples: int, seed, workers: int = 1) -> BirthdayReport:
    """Haar-averaged collision probability for |1,...,1,0,...> against 2 n^2 / m."""
    if samples < 1:
        raise PipelineError("samples must be >= 1")
    if n > m:
        raise PipelineError("the collision-free input needs n <= m")
    t = default_input(m, n)
    streams = np.random.SeedSequence(seed).spawn(samples)

    def one(ss):
        return collision_probability(haar_unitary(m, np.random.default_rng(ss)), t)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(one, streams))
    else:
        vals = [one(ss) for ss in streams]
    return BirthdayReport(m, n, np.array(vals), 2.0 * n * n / m)
