"""Dense statevector and density-matrix kernel.

Layout is little-endian: qubit ``q`` is bit ``q`` of the amplitude index.
A multi-qubit gate matrix acts on ``targets`` in textbook Kronecker order,
i.e. ``targets[0]`` is the most significant bit of the gate's own index.
Pauli strings are written left to right starting at qubit 0 ("XZ" means X on
qubit 0, Z on qubit 1).

All state comparisons in this package ignore global phase.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import cos, sin, sqrt

import numpy as np

MAX_QUBITS = 14
UNITARY_ATOL = 1e-12
NORM_ATOL = 1e-12

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / sqrt(2)
S = np.array([[1, 0], [0, 1j]], dtype=complex)
SDG = S.conj().T
CZ = np.diag([1, 1, 1, -1]).astype(complex)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)

PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}
NAMED_GATES = {"H": H, "S": S, "SDG": SDG, "X": X, "Y": Y, "Z": Z, "CZ": CZ, "CNOT": CNOT}


def rz(theta: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex)


def rx(theta: float) -> np.ndarray:
    c, s = cos(theta / 2), sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry(theta: float) -> np.ndarray:
    c, s = cos(theta / 2), sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rotation(axis: str, theta: float) -> np.ndarray:
    """exp(-i theta P / 2) for a Pauli axis P."""
    builders = {"X": rx, "Y": ry, "Z": rz}
    if axis not in builders:
        raise ValueError(f"unknown rotation axis {axis!r}")
    return builders[axis](theta)


def controlled(u: np.ndarray) -> np.ndarray:
    """4x4 controlled-``u`` with the control as the first (most significant) target."""
    out = np.eye(4, dtype=complex)
    out[2:, 2:] = u
    return out


def is_unitary(u: np.ndarray, atol: float = UNITARY_ATOL) -> bool:
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and np.allclose(
        u.conj().T @ u, np.eye(u.shape[0]), atol=atol, rtol=0
    )


@dataclass(frozen=True)
class PauliString:
    """Tensor product of Pauli letters with a real weight."""

    letters: str
    weight: float = 1.0

    def __post_init__(self):
        letters = self.letters.upper()
        bad = [c for c in letters if c not in "IXYZ"]
        if bad:
            raise ValueError(f"unknown Pauli letter {bad[0]!r} in {self.letters!r}")
        if not letters:
            raise ValueError("empty Pauli string")
        if not np.isfinite(self.weight):
            raise ValueError("Pauli weight must be finite")
        object.__setattr__(self, "letters", letters)

    def __len__(self) -> int:
        return len(self.letters)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, c in enumerate(self.letters) if c != "I")

    def symplectic(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """(x bits, z bits) with Y = XZ up to phase."""
        xs = tuple(int(c in "XY") for c in self.letters)
        zs = tuple(int(c in "ZY") for c in self.letters)
        return xs, zs

    def matrix(self, weighted: bool = True) -> np.ndarray:
        """Full 2^n x 2^n matrix in the little-endian layout."""
        out = np.array([[1.0 + 0j]])
        for c in self.letters:
            out = np.kron(PAULIS[c], out)
        return self.weight * out if weighted else out


class StateVector:
    """Pure state of ``num_qubits`` qubits; treat instances as immutable."""

    __slots__ = ("num_qubits", "amplitudes")

    def __init__(self, amplitudes, num_qubits: int | None = None):
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        n = int(round(np.log2(amps.size))) if num_qubits is None else num_qubits
        if n < 1 or n > MAX_QUBITS:
            raise ValueError(f"num_qubits must be in [1, {MAX_QUBITS}], got {n}")
        if amps.size != 2**n:
            raise ValueError(f"expected {2**n} amplitudes, got {amps.size}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1) > 1e-9:
            raise ValueError(f"state is not normalized (norm {norm})")
        self.num_qubits = n
        self.amplitudes = amps

    @classmethod
    def zero(cls, num_qubits: int) -> StateVector:
        amps = np.zeros(2**num_qubits, dtype=complex)
        amps[0] = 1
        return cls(amps, num_qubits)

    @classmethod
    def from_qubits(cls, *single_qubit_states) -> StateVector:
        """Product state; argument ``q`` is the state of qubit ``q``."""
        out = np.array([1.0 + 0j])
        for s in single_qubit_states:
            out = np.kron(np.asarray(s, dtype=complex), out)
        return cls(out)

    @classmethod
    def random(cls, num_qubits: int, rng: np.random.Generator) -> StateVector:
        v = rng.normal(size=2**num_qubits) + 1j * rng.normal(size=2**num_qubits)
        return cls(v / np.linalg.norm(v), num_qubits)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.num_qubits)

    def density_matrix(self) -> DensityMatrix:
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))

    def __repr__(self) -> str:
        return f"StateVector(num_qubits={self.num_qubits})"


class DensityMatrix:
    __slots__ = ("num_qubits", "entries")

    def __init__(self, entries, validate: bool = True):
        rho = np.asarray(entries, dtype=complex)
        n = int(round(np.log2(rho.shape[0])))
        if rho.shape != (2**n, 2**n) or n < 1 or n > MAX_QUBITS:
            raise ValueError(f"bad density-matrix shape {rho.shape}")
        if validate:
            if not np.allclose(rho, rho.conj().T, atol=1e-12, rtol=0):
                raise ValueError("density matrix is not Hermitian")
            if abs(np.trace(rho) - 1) > 1e-12:
                raise ValueError(f"density matrix trace is {np.trace(rho)}")
            if np.linalg.eigvalsh(rho).min() < -1e-10:
                raise ValueError("density matrix is not positive semidefinite")
        self.num_qubits = n
        self.entries = rho

    @classmethod
    def maximally_mixed(cls, num_qubits: int) -> DensityMatrix:
        d = 2**num_qubits
        return cls(np.eye(d, dtype=complex) / d)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def __repr__(self) -> str:
        return f"DensityMatrix(num_qubits={self.num_qubits})"


def _check_targets(n: int, targets) -> tuple[int, ...]:
    targets = tuple(int(t) for t in targets)
    if len(set(targets)) != len(targets):
        raise ValueError(f"targets must be distinct: {targets}")
    for t in targets:
        if not 0 <= t < n:
            raise IndexError(f"qubit {t} out of range for {n} qubits")
    return targets


def apply_matrix(tensor: np.ndarray, gate: np.ndarray, targets, n: int) -> np.ndarray:
    """Contract ``gate`` into a (2,)*n amplitude tensor; no validation."""
    k = len(targets)
    axes = [n - 1 - t for t in targets]
    g = gate.reshape((2,) * (2 * k))
    out = np.tensordot(g, tensor, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes)


def apply_gate(state: StateVector, gate, targets) -> StateVector:
    """Return ``gate`` applied to ``targets`` of ``state``.

    ``gate`` is a 2x2 or 4x4 unitary, or a name from ``NAMED_GATES``.
    """
    if isinstance(gate, str):
        gate = NAMED_GATES[gate.upper()]
    gate = np.asarray(gate, dtype=complex)
    if isinstance(targets, (int, np.integer)):
        targets = (targets,)
    targets = _check_targets(state.num_qubits, targets)
    if gate.shape != (2 ** len(targets),) * 2 or len(targets) > 2:
        raise ValueError(f"gate of shape {gate.shape} does not match {len(targets)} target(s)")
    if not is_unitary(gate):
        raise ValueError("gate is not unitary")
    out = apply_matrix(state.tensor(), gate, targets, state.num_qubits)
    return _wrap(out.reshape(-1), state.num_qubits)


def _wrap(amps: np.ndarray, n: int) -> StateVector:
    sv = StateVector.__new__(StateVector)
    sv.num_qubits = n
    sv.amplitudes = amps
    return sv


BASES = ("Z", "Y", "rotated")


def _basis_change(basis: str, angle: float) -> np.ndarray:
    """Unitary taking the measurement basis to the computational basis."""
    if basis == "Z":
        return I2
    if basis == "Y":
        return H @ SDG
    if basis == "rotated":
        return H @ rz(angle)
    raise ValueError(f"unknown basis {basis!r}; expected one of {BASES}")


def outcome_probabilities(state: StateVector, qubit: int, basis: str = "Z", angle: float = 0.0):
    """Exact Born probabilities (p0, p1) for measuring ``qubit``."""
    (qubit,) = _check_targets(state.num_qubits, (qubit,))
    t = apply_matrix(state.tensor(), _basis_change(basis, angle), (qubit,), state.num_qubits)
    t = np.moveaxis(t, state.num_qubits - 1 - qubit, 0)
    p1 = float(np.sum(np.abs(t[1]) ** 2))
    p0 = float(np.sum(np.abs(t[0]) ** 2))
    return p0, p1


def project(state: StateVector, qubit: int, outcome: int, basis: str = "Z", angle: float = 0.0):
    """Unnormalized post-measurement amplitudes and the outcome probability.

    The measured qubit is left in the computational state ``|outcome>``
    (the basis change is not undone).
    """
    (qubit,) = _check_targets(state.num_qubits, (qubit,))
    n = state.num_qubits
    t = apply_matrix(state.tensor(), _basis_change(basis, angle), (qubit,), n)
    index = [slice(None)] * n
    index[n - 1 - qubit] = 1 - outcome
    t[tuple(index)] = 0
    amps = t.reshape(-1)
    return amps, float(np.vdot(amps, amps).real)


def measure_qubit(state: StateVector, qubit: int, rng: np.random.Generator,
                  basis: str = "Z", angle: float = 0.0) -> tuple[int, StateVector]:
    """Projective measurement with the outcome drawn from ``rng``.

    ``basis="rotated"`` applies H.Rz(angle) and then measures Z, which is the
    client's single combined measurement on a received ancilla.
    """
    p0, _ = outcome_probabilities(state, qubit, basis, angle)
    outcome = 0 if rng.random() < p0 else 1
    amps, p = project(state, qubit, outcome, basis, angle)
    return outcome, _wrap(amps / sqrt(p), state.num_qubits)


def append_qubit(state: StateVector, single) -> StateVector:
    """Add a new most-significant qubit (index ``num_qubits``) in state ``single``."""
    single = np.asarray(single, dtype=complex)
    return _wrap(np.kron(single, state.amplitudes), state.num_qubits + 1)


def remove_qubit(state: StateVector, qubit: int, value: int) -> StateVector:
    """Drop ``qubit``, which must be in the computational state ``|value>``."""
    n = state.num_qubits
    (qubit,) = _check_targets(n, (qubit,))
    t = np.moveaxis(state.tensor(), n - 1 - qubit, 0)
    kept = t[value]
    if abs(np.linalg.norm(kept) - 1) > 1e-9:
        raise ValueError(f"qubit {qubit} is not in |{value}>; cannot discard it")
    return _wrap(np.ascontiguousarray(kept).reshape(-1), n - 1)


def partial_trace(state, keep) -> DensityMatrix:
    """Reduced density matrix on ``keep``, relabelled 0..k-1 in ascending order."""
    n = state.num_qubits
    keep = sorted(set(int(q) for q in keep))
    if not keep:
        raise ValueError("keep set must be nonempty")
    _check_targets(n, keep)
    drop = [q for q in range(n) if q not in keep]
    keep_axes = [n - 1 - q for q in reversed(keep)]
    drop_axes = [n - 1 - q for q in reversed(drop)]
    dk = 2 ** len(keep)
    if isinstance(state, StateVector):
        a = np.transpose(state.tensor(), keep_axes + drop_axes).reshape(dk, -1)
        return DensityMatrix(a @ a.conj().T, validate=False)
    rho = state.entries.reshape((2,) * (2 * n))
    perm = keep_axes + drop_axes + [n + ax for ax in keep_axes] + [n + ax for ax in drop_axes]
    rho = np.transpose(rho, perm).reshape(dk, 2 ** len(drop), dk, 2 ** len(drop))
    return DensityMatrix(np.einsum("ajbj->ab", rho), validate=False)


def apply_pauli(tensor: np.ndarray, letters: str, n: int) -> np.ndarray:
    for q, c in enumerate(letters):
        if c != "I":
            tensor = apply_matrix(tensor, PAULIS[c], (q,), n)
    return tensor


def expectation(state, obs: PauliString) -> float:
    """weight * <P> for a pure state or a density matrix."""
    n = state.num_qubits
    if len(obs) != n:
        raise ValueError(f"observable {obs.letters!r} has length {len(obs)}, state has {n} qubits")
    if isinstance(state, DensityMatrix):
        return float(obs.weight * np.real(np.trace(obs.matrix(weighted=False) @ state.entries)))
    t = state.tensor()
    val = np.vdot(t.reshape(-1), apply_pauli(t, obs.letters, n).reshape(-1)).real
    return float(obs.weight * val)


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2; insensitive to global phase."""
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    if a.entries.shape != b.entries.shape:
        raise ValueError("density matrices have different dimensions")
    ev = np.linalg.eigvalsh(a.entries - b.entries)
    return float(min(1.0, 0.5 * np.abs(ev).sum()))


def operator(gate: np.ndarray, targets, n: int) -> np.ndarray:
    """Full 2^n x 2^n matrix of ``gate`` on ``targets``."""
    d = 2**n
    cols = np.eye(d, dtype=complex).reshape((d,) + (2,) * n)
    out = np.stack([apply_matrix(c, gate, targets, n).reshape(-1) for c in cols], axis=1)
    return out
