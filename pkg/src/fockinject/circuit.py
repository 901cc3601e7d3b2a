"""Parameterised single-photon optics.

A circuit is an ordered list of beam-splitters and phase-shifters. List order
is temporal order: the first gate acts first, so the single-photon unitary is
``G_L @ ... @ G_2 @ G_1``.

Beam-splitter conventions (angle ``theta``):

* ``rotation``   -- ``[[cos, -sin], [sin, cos]]``, real orthogonal
* ``symmetric``  -- ``[[cos, i sin], [i sin, cos]]``

A phase-shifter multiplies its mode by ``exp(i phi)``. Determinants are never
renormalised, so meshes live in U(m) rather than SU(m).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * math.pi
CONVENTIONS = ("rotation", "symmetric")
MESH_STYLES = ("triangular-rotations", "rotations-plus-phases")


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    kind: str  # "bs" or "ps"
    modes: tuple[int, ...]
    slot: int | None = None
    fixed: float | None = None
    convention: str = "rotation"

    def __post_init__(self):
        if self.kind not in ("bs", "ps"):
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        want = 2 if self.kind == "bs" else 1
        if len(self.modes) != want:
            raise CircuitError(f"{self.kind} gate needs {want} mode(s), got {self.modes}")
        if len(set(self.modes)) != len(self.modes) or min(self.modes) < 0:
            raise CircuitError(f"gate modes must be distinct and non-negative: {self.modes}")
        if (self.slot is None) == (self.fixed is None):
            raise CircuitError("a gate has either a parameter slot or a fixed value, not both")
        if self.fixed is not None and not 0.0 <= self.fixed < TWO_PI:
            raise CircuitError(f"fixed angle {self.fixed} outside [0, 2pi)")
        if self.slot is not None and self.slot < 0:
            raise CircuitError(f"negative parameter slot {self.slot}")
        if self.convention not in CONVENTIONS:
            raise CircuitError(f"unknown beam-splitter convention {self.convention!r}")

    @property
    def parameterized(self) -> bool:
        return self.slot is not None


def beamsplitter(i: int, j: int, slot: int | None = None, fixed: float | None = None,
                 convention: str = "rotation") -> Gate:
    return Gate("bs", (i, j), slot, fixed, convention)


def phaseshifter(i: int, slot: int | None = None, fixed: float | None = None) -> Gate:
    return Gate("ps", (i,), slot, fixed)


@dataclass(frozen=True)
class ParamCircuit:
    modes: int
    gates: tuple[Gate, ...]
    parameter_count: int

    def __post_init__(self):
        if self.modes < 1:
            raise CircuitError("a circuit needs at least one mode")
        used = set()
        for g in self.gates:
            if max(g.modes) >= self.modes:
                raise CircuitError(f"gate {g} addresses a mode >= {self.modes}")
            if g.slot is not None:
                if g.slot >= self.parameter_count:
                    raise CircuitError(f"slot {g.slot} >= parameter count {self.parameter_count}")
                used.add(g.slot)
        unused = set(range(self.parameter_count)) - used
        if unused:
            raise CircuitError(f"parameter slots bound to no gate: {sorted(unused)}")

    @classmethod
    def from_gates(cls, modes: int, gates: Sequence[Gate]) -> "ParamCircuit":
        """Build a circuit, inferring the parameter count from the largest slot."""
        slots = [g.slot for g in gates if g.slot is not None]
        return cls(modes, tuple(gates), max(slots) + 1 if slots else 0)

    def __len__(self) -> int:
        return len(self.gates)


def gate_block(g: Gate, value: float) -> np.ndarray:
    """The 2x2 (beam-splitter) or 1x1 (phase-shifter) block of a gate."""
    if g.kind == "ps":
        return np.array([[np.exp(1j * value)]])
    c, s = math.cos(value), math.sin(value)
    if g.convention == "rotation":
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    return np.array([[c, 1j * s], [1j * s, c]])


def gate_generator(g: Gate) -> np.ndarray:
    """Constant K with d/dvalue block = K @ block (and = block @ K)."""
    if g.kind == "ps":
        return np.array([[1j]])
    if g.convention == "rotation":
        return np.array([[0, -1], [1, 0]], dtype=np.complex128)
    return np.array([[0, 1j], [1j, 0]])


def _embed(block: np.ndarray, modes: tuple[int, ...], m: int, base: float) -> np.ndarray:
    out = np.eye(m, dtype=np.complex128) * base
    idx = np.array(modes)
    out[np.ix_(idx, idx)] = block
    return out


def _value(g: Gate, theta: np.ndarray) -> float:
    return float(theta[g.slot]) if g.slot is not None else float(g.fixed)


def gate_matrix(g: Gate, value: float, m: int) -> np.ndarray:
    if not math.isfinite(value):
        raise CircuitError(f"non-finite gate value {value}")
    if max(g.modes) >= m:
        raise CircuitError(f"gate {g} does not fit on {m} modes")
    return _embed(gate_block(g, value), g.modes, m, 1.0)


def gate_generator_matrix(g: Gate, m: int) -> np.ndarray:
    return _embed(gate_generator(g), g.modes, m, 0.0)


def _check_theta(c: ParamCircuit, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if theta.size != c.parameter_count:
        raise CircuitError(f"expected {c.parameter_count} parameters, got {theta.size}")
    return theta


def _apply_left(U: np.ndarray, g: Gate, block: np.ndarray) -> None:
    idx = list(g.modes)
    U[idx, :] = block @ U[idx, :]


def single_photon_unitary(c: ParamCircuit, theta) -> np.ndarray:
    theta = _check_theta(c, theta)
    U = np.eye(c.modes, dtype=np.complex128)
    for g in c.gates:
        _apply_left(U, g, gate_block(g, _value(g, theta)))
    return U


def single_photon_jacobian(c: ParamCircuit, theta) -> list[np.ndarray]:
    """Exact dW/dtheta_a for every slot ``a``.

    With ``P_k`` the product of the gates before gate ``k`` and ``K_k`` its
    generator, ``dW/dtheta = W @ P_k^dagger @ K_k @ P_k`` summed over the gates
    bound to that slot.
    """
    theta = _check_theta(c, theta)
    m = c.modes
    jac = [np.zeros((m, m), dtype=np.complex128) for _ in range(c.parameter_count)]
    prefix = np.eye(m, dtype=np.complex128)
    for g in c.gates:
        if g.slot is not None:
            K = gate_generator_matrix(g, m)
            jac[g.slot] += prefix.conj().T @ K @ prefix
        _apply_left(prefix, g, gate_block(g, _value(g, theta)))
    W = prefix
    return [W @ x for x in jac]


def universal_mesh(m: int, style: str = "triangular-rotations",
                   convention: str = "rotation") -> ParamCircuit:
    """Reck-style triangle of nearest-neighbour beam-splitters.

    ``triangular-rotations`` emits m(m-1)/2 parameterised beam-splitters, enough
    for the orthogonal group with the rotation convention.
    ``rotations-plus-phases`` puts a phase-shifter before every beam-splitter
    and a final column of phases, m**2 slots in total.
    """
    if m < 2:
        raise CircuitError("a mesh needs at least two modes")
    if style not in MESH_STYLES:
        raise CircuitError(f"unknown mesh style {style!r}")
    gates: list[Gate] = []
    slot = 0
    for diag in range(m - 1):
        for j in range(diag, -1, -1):
            if style == "rotations-plus-phases":
                gates.append(phaseshifter(j, slot=slot))
                slot += 1
            gates.append(beamsplitter(j, j + 1, slot=slot, convention=convention))
            slot += 1
    if style == "rotations-plus-phases":
        for j in range(m):
            gates.append(phaseshifter(j, slot=slot))
            slot += 1
    return ParamCircuit(m, tuple(gates), slot)


def with_random_beamsplitters(c: ParamCircuit, count: int, seed,
                              convention: str = "rotation") -> ParamCircuit:
    """Append ``count`` parameterised beam-splitters on uniformly drawn mode pairs."""
    rng = np.random.default_rng(seed)
    gates = list(c.gates)
    slot = c.parameter_count
    for _ in range(count):
        i, j = sorted(int(x) for x in rng.choice(c.modes, size=2, replace=False))
        gates.append(beamsplitter(i, j, slot=slot, convention=convention))
        slot += 1
    return ParamCircuit(c.modes, tuple(gates), slot)


def haar_unitary(m: int, seed=None) -> np.ndarray:
    """Haar-random m x m unitary: QR of a complex Ginibre matrix, phases fixed by diag(R)."""
    if m < 1:
        raise CircuitError("m must be >= 1")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def circuit_to_dict(c: ParamCircuit) -> dict:
    gates = []
    for g in c.gates:
        entry: dict = {"kind": g.kind}
        if g.kind == "bs":
            entry["modes"] = list(g.modes)
            entry["convention"] = g.convention
        else:
            entry["mode"] = g.modes[0]
        if g.slot is not None:
            entry["slot"] = g.slot
        else:
            entry["fixed"] = g.fixed
        gates.append(entry)
    return {"modes": c.modes, "gates": gates}


def circuit_from_dict(data: dict) -> ParamCircuit:
    try:
        m = int(data["modes"])
        gates = []
        for entry in data["gates"]:
            kind = entry["kind"]
            slot = entry.get("slot")
            fixed = entry.get("fixed")
            fixed = None if fixed is None else float(fixed)
            if kind == "bs":
                gates.append(Gate("bs", tuple(int(x) for x in entry["modes"]), slot, fixed,
                                  entry.get("convention", "rotation")))
            elif kind == "ps":
                gates.append(Gate("ps", (int(entry["mode"]),), slot, fixed))
            else:
                raise CircuitError(f"unknown gate kind {kind!r}")
    except (KeyError, TypeError) as exc:
        raise CircuitError(f"malformed circuit description: {exc}") from exc
    return ParamCircuit.from_gates(m, gates)


def load_circuit(path) -> ParamCircuit:
    with open(path, encoding="utf-8") as fh:
        return circuit_from_dict(json.load(fh))
