"""Output-probability estimation for pipelines with k single-mode injections.

A pipeline ``T_0, SI, T_1, SI, ..., T_k`` (identity injections) is replaced by
one static unitary on m + k modes in which every measured photon leaves on a
dedicated output mode and every re-injected photon enters on a dedicated
ancilla mode. Mode layout of the equivalent unitary:

* inputs:  ancilla of injection j on mode ``k - j`` (j = 1..k), then the m
  primary input modes on ``k .. k+m-1``
* outputs: the m primary outputs on ``0 .. m-1``, then the measured mode of
  injection j on ``m + k - j``

Layer ``T_j`` acts on modes ``k-j .. k-j+m-1``; inside each layer the last
local mode is the one measured and the first local input is the one injected.
:func:`equivalent_from_pipeline` converts an ordinary pipeline that measures
and re-injects on one fixed mode into this layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel import identity_injection, inject_array, injection_blocks
from .fock import (
    INT64_MAX,
    FockError,
    as_state,
    basis_index,
    enumerate_basis,
    occupation_factorial,
    substitution_submatrix,
)
from .lift import lift_matrix
from .permanent import PERMANENT_CAP, gurvits_estimate, permanent_exact


class EstimationError(ValueError):
    pass


@dataclass(frozen=True)
class EquivalentModel:
    k: int
    modes: int
    layer_unitaries: tuple[np.ndarray, ...]
    equivalent_unitary: np.ndarray
    mode_map: dict = field(compare=False)

    @property
    def total_modes(self) -> int:
        return self.modes + self.k

    def input_occupation(self, t: Sequence[int], pattern: Sequence[int]) -> tuple[int, ...]:
        occ = [0] * self.total_modes
        for j, pj in enumerate(pattern, start=1):
            occ[self.k - j] = int(pj)
        for i, ti in enumerate(t):
            occ[self.k + i] = int(ti)
        return tuple(occ)

    def output_occupation(self, s: Sequence[int], pattern: Sequence[int]) -> tuple[int, ...]:
        occ = [0] * self.total_modes
        for i, si in enumerate(s):
            occ[i] = int(si)
        for j, pj in enumerate(pattern, start=1):
            occ[self.modes + self.k - j] = int(pj)
        return tuple(occ)


@dataclass(frozen=True)
class Pattern:
    """Photon counts seen by the k injections, in injection order."""

    counts: tuple[int, ...]

    @property
    def r(self) -> int:
        return sum(self.counts)


def _check_unitary(U: np.ndarray, m: int, atol: float = 1e-10) -> np.ndarray:
    U = np.asarray(U, dtype=np.complex128)
    if U.shape != (m, m):
        raise EstimationError(f"layer of shape {U.shape}, expected ({m}, {m})")
    if np.max(np.abs(U.conj().T @ U - np.eye(m))) > atol:
        raise EstimationError("layer is not unitary")
    return U


def build_equivalent(layers: Sequence[np.ndarray]) -> EquivalentModel:
    """Equivalent (m+k)-mode unitary of layers ``T_0..T_k`` given in temporal order.

    Written with the reverse labelling ``U^l = T_{k-l}`` this is the ordered
    matrix product ``prod_{l=0..k} (1_l (+) U^l (+) 1_{k-l})``.
    """
    if len(layers) == 0:
        raise EstimationError("need at least one layer")
    m = np.shape(layers[0])[0]
    mats = tuple(_check_unitary(U, m) for U in layers)
    k = len(mats) - 1
    total = m + k
    eq = np.eye(total, dtype=np.complex128)
    for j, T in enumerate(mats):
        lo = k - j
        full = np.eye(total, dtype=np.complex128)
        full[lo:lo + m, lo:lo + m] = T
        eq = full @ eq
    mode_map = {
        "input_ancilla": [k - j for j in range(1, k + 1)],
        "input_primary": list(range(k, k + m)),
        "output_primary": list(range(m)),
        "output_measured": [m + k - j for j in range(1, k + 1)],
    }
    return EquivalentModel(k, m, mats, eq, mode_map)


def _order_matrix(order: Sequence[int]) -> np.ndarray:
    P = np.zeros((len(order), len(order)))
    P[np.arange(len(order)), list(order)] = 1.0
    return P


def equivalent_from_pipeline(layers: Sequence[np.ndarray], measured_mode: int) -> EquivalentModel:
    """Equivalent model of ``V_0, SI, V_1, ..., SI, V_k`` with identity injection on one mode.

    Each layer is relabelled so that the measured mode comes last on output and
    the injected mode first on input; the first input and last output keep the
    physical labels.
    """
    m = np.shape(layers[0])[0]
    if not 0 <= measured_mode < m:
        raise EstimationError(f"measured mode {measured_mode} outside {m} modes")
    rest = [q for q in range(m) if q != measured_mode]
    p_out = _order_matrix(rest + [measured_mode])
    p_in = _order_matrix([measured_mode] + rest)
    k = len(layers) - 1
    converted = []
    for j, V in enumerate(layers):
        T = np.asarray(V, dtype=np.complex128)
        if j > 0:
            T = T @ p_in.T
        if j < k:
            T = p_out @ T
        converted.append(T)
    return build_equivalent(converted)


def enumerate_patterns(k: int, r: int) -> list[Pattern]:
    """All k-tuples of non-negative counts summing to r, lexicographically descending."""
    if k < 1:
        raise EstimationError("k must be >= 1")
    if r < 0:
        raise EstimationError("r must be >= 0")
    return [Pattern(s) for s in enumerate_basis(k, r).states]


def pattern_count(k: int, r: int) -> int:
    """|patterns| = C(r+k-1, k-1), checked against int64 overflow."""
    count = math.comb(r + k - 1, k - 1)
    if count > INT64_MAX:
        raise OverflowError(f"pattern count for k={k}, r={r} overflows int64")
    return count


def _term_matrix(em: EquivalentModel, t, p, s):
    t, s, p = as_state(t), as_state(s), as_state(p)
    if len(t) != em.modes or len(s) != em.modes:
        raise FockError(f"states must live on {em.modes} modes")
    if len(p) != em.k:
        raise EstimationError(f"pattern {p} has {len(p)} entries, model has k={em.k}")
    if sum(s) != sum(t):
        raise FockError(f"photon count mismatch between {t} and {s}")
    size = sum(t) + sum(p)
    if size > PERMANENT_CAP:
        raise EstimationError(f"{size} photons in the equivalent model exceed the cap {PERMANENT_CAP}")
    inp = em.input_occupation(t, p)
    out = em.output_occupation(s, p)
    sub = substitution_submatrix(em.equivalent_unitary, out, inp)
    norm = float(occupation_factorial(inp)) * float(occupation_factorial(out))
    return sub, norm


def joint_probability(em: EquivalentModel, t, p, s) -> float:
    """Probability of seeing pattern p at the injections and s at the output.

    Equals |per(Ũ[(s,p) rows, (p,t) cols])|^2 / ((p!)^2 s! t!).
    """
    counts = p.counts if isinstance(p, Pattern) else p
    sub, norm = _term_matrix(em, t, counts, s)
    return abs(permanent_exact(sub)) ** 2 / norm


def all_patterns(k: int, n: int) -> list[tuple[int, ...]]:
    """Every reachable pattern: each injection sees between 0 and n photons, grouped by r."""
    if k == 0:
        return [()]
    out = []
    for r in range(k * n + 1):
        out.extend(pt.counts for pt in enumerate_patterns(k, r) if max(pt.counts) <= n)
    return out


@dataclass(frozen=True)
class ProbabilityEstimate:
    value: float
    std_error: float
    method: str
    bias_corrected: float

    def to_record(self, t, s) -> dict:
        return {"t": list(t), "s": list(s), "method": self.method,
                "value": self.value, "std_error": self.std_error,
                "bias_corrected": self.bias_corrected}


def output_probability(em: EquivalentModel, t, s, mode: str = "exact", samples: int = 0,
                       seed: int | Sequence[int] = 0) -> ProbabilityEstimate:
    """Pr_t[s], summing the joint probability over every reachable pattern.

    ``mode="gurvits"`` replaces each permanent by a Gurvits estimate with
    ``samples`` draws (stream seeded by ``(seed, pattern index)``). Squaring an
    unbiased amplitude estimate biases it upwards by its variance; the plug-in
    value is reported as ``value`` and ``bias_corrected`` subtracts that
    variance. The standard error is the delta-method one plus the bias term.
    """
    t = as_state(t)
    n = sum(t)
    if mode == "exact":
        total = sum(joint_probability(em, t, p, s) for p in all_patterns(em.k, n))
        return ProbabilityEstimate(total, 0.0, "exact", total)
    if mode != "gurvits":
        raise EstimationError(f"unknown estimation mode {mode!r}")
    if samples < 1:
        raise EstimationError("gurvits mode needs samples >= 1")
    base = [int(x) for x in np.atleast_1d(seed)]
    plug, corrected, var = 0.0, 0.0, 0.0
    for idx, p in enumerate(all_patterns(em.k, n)):
        sub, norm = _term_matrix(em, t, p, s)
        est = gurvits_estimate(sub, samples, seed=[*base, idx])
        se = est.empirical_std_error
        sq = abs(est.value) ** 2
        plug += sq / norm
        corrected += (sq - se * se) / norm
        var += ((2.0 * abs(est.value) * se + se * se) / norm) ** 2
    return ProbabilityEstimate(plug, math.sqrt(var), f"gurvits({samples})", corrected)


def output_distribution(em: EquivalentModel, t) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """Exact Pr_t[s] for every n-photon output s, in basis order."""
    basis = enumerate_basis(em.modes, sum(as_state(t)))
    return list(basis.states), np.array([output_probability(em, t, s).value for s in basis.states])


def simulate_injection_pipeline(layers: Sequence[np.ndarray], t, measured_mode: int) -> np.ndarray:
    """Channel-level oracle: output photon-count distribution of the physical pipeline.

    Applies the lifted layers one after another with an identity injection on
    ``measured_mode`` between consecutive layers, then reads the diagonal.
    """
    t = as_state(t)
    m = np.shape(layers[0])[0]
    basis = enumerate_basis(m, sum(t))
    blocks = injection_blocks(identity_injection([measured_mode]), m, basis.photons)
    rho = np.zeros((basis.dim, basis.dim), dtype=np.complex128)
    i = basis_index(basis, t)
    rho[i, i] = 1.0
    for j, V in enumerate(layers):
        W = lift_matrix(V, basis)
        rho = W @ rho @ W.conj().T
        if j < len(layers) - 1:
            rho = inject_array(rho, blocks)
    return np.real(np.diag(rho)).copy()


# --- classical-simulability regimes ---------------------------------------------

EFFICIENT = "efficient-classical"
HARD = "no-known-efficient-classical"
UNREACHABLE = "unreachable"

K_CLASSES = ("const", "log m", "linear m")
R_CLASSES = ("const", "log m", "linear m", "m log m", "m^2")

_ALIASES = {
    "const": "const", "o(1)": "const", "1": "const",
    "log m": "log m", "o(log m)": "log m", "log": "log m",
    "linear m": "linear m", "o(m)": "linear m", "m": "linear m", "linear": "linear m",
    "m log m": "m log m", "o(m log m)": "m log m",
    "m^2": "m^2", "m²": "m^2", "o(m^2)": "m^2", "o(m²)": "m^2", "quadratic m": "m^2",
}

# rows: r class, columns: k class
_SI_TABLE = {
    "const":    (EFFICIENT, EFFICIENT, EFFICIENT),
    "log m":    (EFFICIENT, EFFICIENT, HARD),
    "linear m": (EFFICIENT, HARD, HARD),
    "m log m":  (UNREACHABLE, HARD, HARD),
    "m^2":      (UNREACHABLE, UNREACHABLE, HARD),
}

# adaptive linear optics reference grid; r only goes up to linear m there
_ALO_TABLE = {
    "const":    (EFFICIENT, EFFICIENT, EFFICIENT),
    "log m":    (EFFICIENT, EFFICIENT, HARD),
    "linear m": (EFFICIENT, HARD, HARD),
}


def _label(value: str, allowed: Sequence[str], what: str) -> str:
    key = _ALIASES.get(str(value).strip().lower().replace("·", " ").replace("*", " "))
    if key is None or key not in allowed:
        raise EstimationError(f"invalid {what} class {value!r}; expected one of {list(allowed)}")
    return key


def classify_regime(k_class: str, r_class: str) -> str:
    """Simulability of probability estimation with injections for (k, r) growth classes."""
    k = _label(k_class, K_CLASSES, "k")
    r = _label(r_class, R_CLASSES, "r")
    return _SI_TABLE[r][K_CLASSES.index(k)]


def classify_alo_regime(k_class: str, r_class: str) -> str:
    """Same lookup for the adaptive (feed-forward) scheme used as comparison."""
    k = _label(k_class, K_CLASSES, "k")
    r = _label(r_class, tuple(_ALO_TABLE), "r")
    return _ALO_TABLE[r][K_CLASSES.index(k)]


def regime_grid() -> list[tuple[str, str, str]]:
    """Every (k class, r class, verdict) cell of the injection-scheme table."""
    return [(k, r, classify_regime(k, r)) for r in R_CLASSES for k in K_CLASSES]
