"""Parameterized ansatz circuits and their blind compilation.

An ansatz is a flat gate list.  Runs of fixed gates form the layers V_k and
each parameterized gate is one U_k(theta_k).  Parameter indices are 0-based.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .adqc import (
    PHOTONS_PER_ROTATION,
    ClientRotation,
    ServerGate,
    plan_controlled_rotation,
)
from .pauli_frame import CLIFFORDS
from .statevec import MAX_QUBITS, StateVector, apply_gate, controlled, rotation

ROTATION = "rotation"
CONTROLLED = "controlled"


@dataclass(frozen=True)
class FixedGate:
    name: str
    qubits: tuple[int, ...]

    def __post_init__(self):
        if self.name not in CLIFFORDS:
            raise ValueError(f"fixed gate {self.name!r} not in {CLIFFORDS}")
        if len(self.qubits) != (2 if self.name == "CZ" else 1):
            raise ValueError(f"{self.name} takes {2 if self.name == 'CZ' else 1} qubit(s)")


@dataclass(frozen=True)
class ParamGate:
    """Rp(theta) on one qubit, or controlled-Rp(theta) on (control, target)."""

    kind: str
    axis: str
    qubits: tuple[int, ...]
    param: int

    def __post_init__(self):
        if self.kind not in (ROTATION, CONTROLLED):
            raise ValueError(f"unknown parameterized gate kind {self.kind!r}")
        if self.axis not in ("X", "Y", "Z"):
            raise ValueError(f"unknown rotation axis {self.axis!r}")
        if len(self.qubits) != (1 if self.kind == ROTATION else 2):
            raise ValueError(f"{self.kind} gate has wrong qubit count {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError("control and target must differ")

    def matrix(self, angle: float) -> np.ndarray:
        u = rotation(self.axis, angle)
        return u if self.kind == ROTATION else controlled(u)

    @property
    def photons(self) -> int:
        return PHOTONS_PER_ROTATION * (1 if self.kind == ROTATION else 2)


Gate = Union[FixedGate, ParamGate]


@dataclass(frozen=True)
class RotationBlock:
    """One client rotation block inside a compiled schedule."""

    gate_index: int
    rotation: ClientRotation

    @property
    def qubit(self) -> int:
        return self.rotation.qubit


ScheduleOp = Union[ServerGate, RotationBlock]


@dataclass(frozen=True)
class AnsatzSpec:
    num_qubits: int
    num_parameters: int
    gates: tuple[Gate, ...]

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if not 1 <= self.num_qubits <= MAX_QUBITS - 1:
            raise ValueError(f"register count must be in [1, {MAX_QUBITS - 1}]")
        if self.num_parameters < 0:
            raise ValueError("num_parameters must be nonnegative")
        used = set()
        for g in self.gates:
            for q in g.qubits:
                if not 0 <= q < self.num_qubits:
                    raise ValueError(f"gate {g} addresses qubit {q} outside the register")
            if isinstance(g, ParamGate):
                if not 0 <= g.param < self.num_parameters:
                    raise ValueError(
                        f"parameter index {g.param} out of range for L={self.num_parameters}")
                used.add(g.param)
        missing = sorted(set(range(self.num_parameters)) - used)
        if missing:
            raise ValueError(f"parameters {missing} are never used by the circuit")

    @property
    def param_gates(self) -> list[ParamGate]:
        return [g for g in self.gates if isinstance(g, ParamGate)]

    @property
    def n_single(self) -> int:
        return sum(g.kind == ROTATION for g in self.param_gates)

    @property
    def n_two(self) -> int:
        return sum(g.kind == CONTROLLED for g in self.param_gates)

    def layers(self) -> list[tuple[str, list[Gate]]]:
        """Alternating ("fixed", [...]) / ("param", [gate]) groups, V_1 U_1 V_2 ..."""
        out: list[tuple[str, list[Gate]]] = []
        for g in self.gates:
            if isinstance(g, ParamGate):
                out.append(("param", [g]))
            elif out and out[-1][0] == "fixed":
                out[-1][1].append(g)
            else:
                out.append(("fixed", [g]))
        return out

    def gate_angles(self, theta, shifts=None) -> np.ndarray:
        """Angle of each parameterized gate occurrence, plus optional per-gate shifts."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.num_parameters,):
            raise ValueError(f"expected {self.num_parameters} parameters, got {theta.shape}")
        angles = np.array([theta[g.param] for g in self.param_gates], dtype=float)
        if shifts is not None:
            angles = angles + np.asarray(shifts, dtype=float)
        return angles

    def compile(self) -> list[ScheduleOp]:
        """Server gates and client rotation blocks; depends only on the public circuit."""
        ops: list[ScheduleOp] = []
        k = 0
        for g in self.gates:
            if isinstance(g, FixedGate):
                ops.append(ServerGate(g.name, g.qubits))
                continue
            if g.kind == ROTATION:
                ops.append(RotationBlock(k, ClientRotation(g.qubits[0], g.axis, 1.0)))
            else:
                plan = plan_controlled_rotation(g.axis, *g.qubits)
                for op in plan.ops:
                    ops.append(RotationBlock(k, op) if isinstance(op, ClientRotation) else op)
            k += 1
        return ops

    def server_schedule(self) -> list[tuple[str, tuple[int, ...]]]:
        """What the server executes: Clifford gates and ancilla rounds, in order."""
        out = []
        for op in self.compile():
            if isinstance(op, ServerGate):
                out.append((op.name, op.qubits))
            else:
                out.extend([("ROUND", (op.qubit,))] * PHOTONS_PER_ROTATION)
        return out

    def rotated_checkpoint(self) -> int | None:
        """Schedule length after which every register qubit has had a full block."""
        seen: set[int] = set()
        for i, op in enumerate(self.compile()):
            if isinstance(op, RotationBlock):
                seen.add(op.qubit)
                if len(seen) == self.num_qubits:
                    return i + 1
        return None

    def prepare_direct(self, theta, shifts=None) -> StateVector:
        """Ideal U_AN(theta)|0...0> by direct gate application (no ancillas)."""
        angles = iter(self.gate_angles(theta, shifts))
        state = StateVector.zero(self.num_qubits)
        for g in self.gates:
            if isinstance(g, FixedGate):
                state = apply_gate(state, g.name, g.qubits)
            else:
                state = apply_gate(state, g.matrix(next(angles)), g.qubits)
        return state


def photon_count(circuit: AnsatzSpec) -> int:
    """Photons the compiled schedule actually sends (3 per rotation block)."""
    return sum(PHOTONS_PER_ROTATION for op in circuit.compile() if isinstance(op, RotationBlock))


def ising_ansatz() -> AnsatzSpec:
    """Two-qubit hardware-efficient ansatz: RY layer, CZ, RY layer."""
    return AnsatzSpec(2, 4, (
        ParamGate(ROTATION, "Y", (0,), 0),
        ParamGate(ROTATION, "Y", (1,), 1),
        FixedGate("CZ", (0, 1)),
        ParamGate(ROTATION, "Y", (0,), 2),
        ParamGate(ROTATION, "Y", (1,), 3),
    ))


def ladder_ansatz() -> AnsatzSpec:
    """Three qubits: H/S dressing, RY/RZ layers and a CZ ladder."""
    gates = [FixedGate("H", (q,)) for q in range(3)]
    gates += [ParamGate(ROTATION, "Y", (q,), q) for q in range(3)]
    gates += [FixedGate("CZ", (0, 1)), FixedGate("CZ", (1, 2)), FixedGate("S", (2,))]
    gates += [ParamGate(ROTATION, "Z", (q,), 3 + q) for q in range(3)]
    gates += [FixedGate("H", (0,))]
    return AnsatzSpec(3, 6, tuple(gates))


def controlled_ansatz() -> AnsatzSpec:
    """Three qubits with controlled rotations and a shared parameter."""
    return AnsatzSpec(3, 4, (
        ParamGate(ROTATION, "X", (0,), 0),
        ParamGate(ROTATION, "Y", (1,), 1),
        FixedGate("H", (2,)),
        ParamGate(CONTROLLED, "Z", (0, 1), 2),
        ParamGate(CONTROLLED, "X", (1, 2), 3),
        FixedGate("CZ", (0, 2)),
        ParamGate(ROTATION, "Y", (2,), 0),
        ParamGate(CONTROLLED, "Y", (2, 0), 1),
    ))


SHIPPED_ANSATZES = {
    "ising": ising_ansatz,
    "ladder": ladder_ansatz,
    "controlled": controlled_ansatz,
}
