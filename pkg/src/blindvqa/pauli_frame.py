"""Client-side Pauli frame: the byproduct operator left on the register.

A frame ``(x, z)`` stands for the operator prod_q X_q^x[q] Z_q^z[q] acting on
the ideal register state.  Phases are never tracked.  The frame lives only in
the client's private record and must never be put on the channel.
"""
from __future__ import annotations

from dataclasses import dataclass

from .statevec import PauliString

CLIFFORDS = ("H", "S", "CZ")


@dataclass(frozen=True)
class PauliFrame:
    x: tuple[int, ...]
    z: tuple[int, ...]

    def __post_init__(self):
        if len(self.x) != len(self.z):
            raise ValueError("x and z exponent vectors differ in length")
        if any(b not in (0, 1) for b in self.x + self.z):
            raise ValueError("frame exponents must be bits")

    @classmethod
    def identity(cls, num_qubits: int) -> PauliFrame:
        return cls((0,) * num_qubits, (0,) * num_qubits)

    @property
    def num_qubits(self) -> int:
        return len(self.x)

    def letters(self) -> str:
        """Frame as a Pauli string (Y for x=z=1; phase ignored)."""
        return "".join("IZXY"[2 * a + b] for a, b in zip(self.x, self.z))

    def is_identity(self) -> bool:
        return not any(self.x) and not any(self.z)

    def _check(self, qubit: int) -> None:
        if not 0 <= qubit < self.num_qubits:
            raise IndexError(f"qubit {qubit} out of range for a {self.num_qubits}-qubit frame")

    def _set(self, qubit: int, x: int, z: int) -> PauliFrame:
        xs, zs = list(self.x), list(self.z)
        xs[qubit], zs[qubit] = x, z
        return PauliFrame(tuple(xs), tuple(zs))


def absorb_byproduct(frame: PauliFrame, qubit: int, x: int, z: int) -> PauliFrame:
    """Multiply X^x Z^z on ``qubit`` into the frame (mod 2)."""
    frame._check(qubit)
    return frame._set(qubit, frame.x[qubit] ^ (x & 1), frame.z[qubit] ^ (z & 1))


def conjugate_through_clifford(frame: PauliFrame, gate: str, targets) -> PauliFrame:
    """Frame after the server applies ``gate``: P -> G P G^dagger, phase dropped."""
    if isinstance(targets, int):
        targets = (targets,)
    targets = tuple(targets)
    for q in targets:
        frame._check(q)
    gate = gate.upper()
    if gate == "H":
        (q,) = targets
        return frame._set(q, frame.z[q], frame.x[q])
    if gate == "S":
        (q,) = targets
        return frame._set(q, frame.x[q], frame.z[q] ^ frame.x[q])
    if gate == "CZ":
        a, b = targets
        if a == b:
            raise ValueError("CZ needs two distinct qubits")
        zs = list(frame.z)
        zs[a] ^= frame.x[b]
        zs[b] ^= frame.x[a]
        return PauliFrame(frame.x, tuple(zs))
    raise ValueError(f"unsupported gate {gate!r}; the server only applies {CLIFFORDS}")


def adapted_angle(frame: PauliFrame, qubit: int, angle: float) -> float:
    """Measurement angle the client uses so that X^x passes through Rz.

    Rz(-a) X = X Rz(a) up to phase, so an X in the frame flips the sign.
    """
    frame._check(qubit)
    return -angle if frame.x[qubit] else angle


def absorb_round(frame: PauliFrame, qubit: int, outcome: int) -> PauliFrame:
    """Frame after one remote J round on ``qubit`` measured with ``adapted_angle``.

    J(a) X^x Z^z = Z^x X^z J(a') with a' the adapted angle, then the ancilla
    outcome multiplies X^outcome on the left: (x, z) -> (z ^ outcome, x).
    """
    frame._check(qubit)
    return frame._set(qubit, frame.z[qubit] ^ (outcome & 1), frame.x[qubit])


def anticommutes(frame: PauliFrame, obs: PauliString) -> bool:
    if len(obs) != frame.num_qubits:
        raise ValueError(f"observable length {len(obs)} != frame length {frame.num_qubits}")
    ox, oz = obs.symplectic()
    parity = sum(a & d for a, d in zip(frame.x, oz)) + sum(b & c for b, c in zip(frame.z, ox))
    return bool(parity & 1)


def reinterpret_result(frame: PauliFrame, obs: PauliString, raw_eigenvalue: int) -> int:
    """Eigenvalue the ideal state would have produced for ``obs``."""
    if raw_eigenvalue not in (1, -1):
        raise ValueError("raw eigenvalue must be +1 or -1")
    return -raw_eigenvalue if anticommutes(frame, obs) else raw_eigenvalue
