"""Client/server actors, the one-way channel and run orchestration.

During computation the only channel is server -> client: the server sends
ancilla photons (each may be lost) and, at the end of a run, the raw
eigenvalues it measured.  The client keeps its angles, its measurement
outcomes and its Pauli frame private.

Randomness: a run takes one ``numpy.random.Generator`` and spawns two
children from it, ``nature`` (Born-rule outcomes) and ``channel`` (photon
loss).  Repeated runs spawn one child per run from the caller's generator.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from math import ceil
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from . import pauli_frame as pf
from .adqc import (
    PHOTONS_PER_ROTATION,
    ServerGate,
    attach_ancilla,
    entangle_E_AR,
    euler_angles_for,
    kernel_kraus,
)
from .ansatz import AnsatzSpec
from .statevec import (
    NAMED_GATES,
    PAULIS,
    PauliString,
    StateVector,
    apply_matrix,
    measure_qubit,
    operator,
    remove_qubit,
    _wrap,
)

MAX_ATTEMPT_FACTOR = 100


class AnnouncementError(ValueError):
    pass


class AttemptBudgetExceeded(RuntimeError):
    """Too many runs were invalidated by photon loss."""


# -- public announcement ------------------------------------------------------


def measurement_settings(observables: Sequence[PauliString]) -> list[list[int]]:
    """Greedy grouping of observables into qubit-wise commuting sets (by index)."""
    groups: list[list[int]] = []
    bases: list[list[str]] = []
    for k, obs in enumerate(observables):
        for g, basis in zip(groups, bases):
            if all(b == "I" or c == "I" or b == c for b, c in zip(basis, obs.letters)):
                g.append(k)
                for q, c in enumerate(obs.letters):
                    if c != "I":
                        basis[q] = c
                break
        else:
            groups.append([k])
            bases.append(list(obs.letters))
    return groups


@dataclass(frozen=True)
class Announcement:
    """Everything the server broadcasts before the computation starts."""

    circuits: tuple[AnsatzSpec, ...]
    observables: tuple[tuple[PauliString, ...], ...]
    repetitions: tuple[int, ...]
    initial_states: tuple[str, ...]
    num_parameters: int
    num_iterations: int

    @property
    def num_circuits(self) -> int:
        return len(self.circuits)

    def settings(self, circuit_index: int) -> list[list[int]]:
        return measurement_settings(self.observables[circuit_index])

    def circuit(self, circuit_index: int) -> AnsatzSpec:
        if not 0 <= circuit_index < self.num_circuits:
            raise IndexError(f"circuit index {circuit_index} out of range (G={self.num_circuits})")
        return self.circuits[circuit_index]


def announce(circuits, observables, repetitions, num_parameters: int, num_iterations: int,
             initial_states=None) -> Announcement:
    """Validate and freeze the public record."""
    circuits = tuple(circuits)
    if not circuits:
        raise AnnouncementError("at least one circuit is required (G >= 1)")
    if num_iterations < 1:
        raise AnnouncementError("num_iterations (M) must be >= 1")
    if len(observables) != len(circuits) or len(repetitions) != len(circuits):
        raise AnnouncementError("observables and repetitions need one entry per circuit")
    initial_states = tuple(initial_states or ("zero",) * len(circuits))
    obs_out = []
    for i, (c, obs, reps, init) in enumerate(zip(circuits, observables, repetitions, initial_states)):
        if c.num_parameters != num_parameters:
            raise AnnouncementError(
                f"circuit {i} declares L={c.num_parameters}, announcement has L={num_parameters}")
        obs = tuple(o if isinstance(o, PauliString) else PauliString(o) for o in obs)
        if not obs:
            raise AnnouncementError(f"circuit {i} has no observables (K >= 1)")
        for o in obs:
            if len(o) != c.num_qubits:
                raise AnnouncementError(
                    f"observable {o.letters!r} does not match {c.num_qubits} register qubits")
        if int(reps) < 1:
            raise AnnouncementError(f"circuit {i} needs repetitions N >= 1")
        if init != "zero":
            raise AnnouncementError(f"unsupported initial state {init!r}; only 'zero' is announced")
        obs_out.append(tuple(PauliString(o.letters) for o in obs))
    return Announcement(circuits, tuple(obs_out), tuple(int(r) for r in repetitions),
                        initial_states, int(num_parameters), int(num_iterations))


# -- channel and transcript ---------------------------------------------------


class Direction(Enum):
    SERVER_TO_CLIENT = "server->client"
    CLIENT_TO_SERVER = "client->server"


@dataclass(frozen=True)
class AncillaPhoton:
    lost: bool
    kind = "ancilla_photon"

    def bits(self) -> str:
        return "1" if self.lost else "0"


@dataclass(frozen=True)
class ClassicalResults:
    """Raw eigenvalues, one bit per observable of the setting (1 means -1)."""

    bits_: tuple[int, ...]
    kind = "classical_results"

    def bits(self) -> str:
        return "".join(str(b) for b in self.bits_)

    def eigenvalues(self) -> tuple[int, ...]:
        return tuple(1 - 2 * b for b in self.bits_)


@dataclass(frozen=True)
class OpaquePayload:
    """Any other payload, kept as its serialized kind and bits."""

    kind: str
    bits_: str

    def bits(self) -> str:
        return self.bits_


Payload = Union[AncillaPhoton, ClassicalResults, OpaquePayload]


@dataclass(frozen=True)
class ChannelMessage:
    direction: Direction
    payload: Payload


@dataclass(frozen=True)
class TranscriptEntry:
    step: int
    message: ChannelMessage

    def to_record(self) -> dict:
        return {
            "seq": self.step,
            "direction": self.message.direction.value,
            "kind": self.message.payload.kind,
            "bits": self.message.payload.bits(),
        }


class Transcript:
    """Append-only log of channel messages."""

    def __init__(self, entries: Iterable[TranscriptEntry] = ()):
        self._entries: list[TranscriptEntry] = []
        for e in entries:
            self._append_entry(e)

    def _append_entry(self, entry: TranscriptEntry) -> None:
        if self._entries and entry.step <= self._entries[-1].step:
            raise ValueError("transcript steps must increase")
        self._entries.append(entry)

    def append(self, message: ChannelMessage) -> TranscriptEntry:
        step = self._entries[-1].step + 1 if self._entries else 0
        entry = TranscriptEntry(step, message)
        self._entries.append(entry)
        return entry

    @property
    def entries(self) -> tuple[TranscriptEntry, ...]:
        return tuple(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def to_lines(self, run: int = 0) -> list[str]:
        return [json.dumps({"run": run, **e.to_record()}) for e in self._entries]

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> Transcript:
        entries = []
        for line in lines:
            if not line.strip():
                continue
            rec = json.loads(line)
            kind, bits = rec["kind"], str(rec["bits"])
            if kind == AncillaPhoton.kind:
                payload: Payload = AncillaPhoton(bits == "1")
            elif kind == ClassicalResults.kind:
                payload = ClassicalResults(tuple(int(b) for b in bits))
            else:
                payload = OpaquePayload(kind, bits)
            entries.append(TranscriptEntry(int(rec["seq"]),
                                           ChannelMessage(Direction(rec["direction"]), payload)))
        return cls(entries)


@dataclass(frozen=True)
class NoSignalingReport:
    passed: bool
    offending: tuple[TranscriptEntry, ...]


def transcript_no_signaling_check(transcript: Transcript) -> NoSignalingReport:
    """Pass iff no client -> server message occurs."""
    bad = tuple(e for e in transcript if e.message.direction is not Direction.SERVER_TO_CLIENT)
    return NoSignalingReport(not bad, bad)


@dataclass(frozen=True)
class LossModel:
    p_loss: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.p_loss < 1.0:
            raise ValueError(f"p_loss must be in [0, 1), got {self.p_loss}")

    def sample(self, rng: np.random.Generator, size=None):
        """True where a photon transmission is lost; draws are independent."""
        return rng.random(size) < self.p_loss

    def success_probability(self, n_ph: int) -> float:
        return (1.0 - self.p_loss) ** n_ph


class Channel:
    """In-process server -> client channel; there is no way to send the other way."""

    def __init__(self, loss: LossModel, rng: np.random.Generator):
        self.loss = loss
        self.rng = rng
        self.transcript = Transcript()

    def send_photon(self) -> bool:
        lost = bool(self.loss.sample(self.rng))
        self.transcript.append(ChannelMessage(Direction.SERVER_TO_CLIENT, AncillaPhoton(lost)))
        return not lost

    def send_results(self, eigenvalue_bits) -> ClassicalResults:
        payload = ClassicalResults(tuple(int(b) for b in eigenvalue_bits))
        self.transcript.append(ChannelMessage(Direction.SERVER_TO_CLIENT, payload))
        return payload


def photon_budget(circuit: AnsatzSpec) -> int:
    """3 photons per parameterized single-qubit gate, 6 per two-qubit gate."""
    return 3 * circuit.n_single + 6 * circuit.n_two


def required_repetitions(n_ideal: int, loss: LossModel, n_ph: int) -> int:
    if n_ideal < 1:
        raise ValueError("n_ideal must be >= 1")
    return max(1, ceil(n_ideal / loss.success_probability(n_ph) - 1e-9))


# -- quantum system and actors ------------------------------------------------


class QuantumSystem:
    """The physical register plus at most one ancilla in flight.

    ``rng`` plays the role of nature: it draws every Born-rule outcome.
    """

    def __init__(self, num_qubits: int, rng: np.random.Generator):
        self.num_qubits = num_qubits
        self.state = StateVector.zero(num_qubits)
        self.rng = rng

    def apply(self, gate: np.ndarray, qubits) -> None:
        n = self.state.num_qubits
        self.state = _wrap(apply_matrix(self.state.tensor(), gate, tuple(qubits), n).reshape(-1), n)

    def emit_ancilla(self, register_qubit: int) -> None:
        self.state = entangle_E_AR(attach_ancilla(self.state), register_qubit)

    def measure_ancilla(self, angle: float) -> int:
        """The client's rotated measurement; the measured photon leaves the system."""
        anc = self.num_qubits
        j, joint = measure_qubit(self.state, anc, self.rng, basis="rotated", angle=angle)
        self.state = remove_qubit(joint, anc, j)
        return j

    def lose_ancilla(self) -> None:
        """The environment absorbs the photon (modelled as a Z measurement)."""
        anc = self.num_qubits
        j, joint = measure_qubit(self.state, anc, self.rng)
        self.state = remove_qubit(joint, anc, j)

    def sample_register(self) -> tuple[int, ...]:
        probs = np.abs(self.state.amplitudes) ** 2
        idx = int(self.rng.choice(probs.size, p=probs / probs.sum()))
        return tuple((idx >> q) & 1 for q in range(self.num_qubits))


def basis_change_gates(observables: Sequence[PauliString]) -> list[tuple[str, int]]:
    """Server Cliffords that rotate a qubit-wise commuting set onto Z."""
    letters = ["I"] * len(observables[0])
    for o in observables:
        for q, c in enumerate(o.letters):
            if c != "I":
                letters[q] = c
    gates = []
    for q, c in enumerate(letters):
        if c == "X":
            gates.append(("H", q))
        elif c == "Y":
            gates += [("S", q)] * 3 + [("H", q)]
    return gates


def raw_eigenvalue_bits(bits: Sequence[int], observables: Sequence[PauliString]) -> list[int]:
    return [sum(bits[q] for q in o.support) & 1 for o in observables]


class Server:
    """Executes the announced circuit; never sees angles, outcomes or frames."""

    def __init__(self, ann: Announcement, circuit_index: int):
        self.ann = ann
        self.circuit_index = circuit_index
        self.circuit = ann.circuit(circuit_index)
        self.log: list[tuple[str, tuple[int, ...]]] = []

    def run(self, system: QuantumSystem, channel: Channel, client: Client, setting: int) -> None:
        self.prepare(system, channel, client)
        self.readout(system, channel, client, setting)

    def prepare(self, system: QuantumSystem, channel: Channel, client: Client) -> None:
        """Step 1: fixed gates plus one ancilla photon per client round."""
        for op in self.circuit.compile():
            if isinstance(op, ServerGate):
                self._gate(system, op.name, op.qubits)
                continue
            for _ in range(PHOTONS_PER_ROTATION):
                self.log.append(("ROUND", (op.qubit,)))
                system.emit_ancilla(op.qubit)
                if channel.send_photon():
                    client.receive_photon(system)
                else:
                    system.lose_ancilla()
                    client.photon_lost()
                self.after_round(system, channel, op.qubit)

    def readout(self, system: QuantumSystem, channel: Channel, client: Client,
                setting: int) -> None:
        """Step 2: measure one qubit-wise commuting setting and report raw eigenvalues."""
        observables = [self.ann.observables[self.circuit_index][k]
                       for k in self.ann.settings(self.circuit_index)[setting]]
        for name, q in basis_change_gates(observables):
            self._gate(system, name, (q,))
        self.log.append(("MEASURE", tuple(range(system.num_qubits))))
        bits = system.sample_register()
        payload = channel.send_results(raw_eigenvalue_bits(bits, observables))
        client.receive_results(payload)

    def _gate(self, system: QuantumSystem, name: str, qubits) -> None:
        self.log.append((name, tuple(qubits)))
        system.apply(NAMED_GATES[name], qubits)

    def after_round(self, system: QuantumSystem, channel: Channel, qubit: int) -> None:
        """Hook for test fixtures; the honest server does nothing here."""


@dataclass
class RunResult:
    valid: bool
    setting: int
    observable_indices: tuple[int, ...]
    corrected_eigenvalues: tuple[int, ...] | None = None


class Client:
    """Chooses measurement angles from theta and its private frame."""

    def __init__(self, ann: Announcement, circuit_index: int, theta, setting: int = 0,
                 shifts=None):
        self.ann = ann
        self.circuit = ann.circuit(circuit_index)
        self.observable_indices = tuple(ann.settings(circuit_index)[setting])
        self.observables = [ann.observables[circuit_index][k] for k in self.observable_indices]
        self.setting = setting
        self._angles = self.circuit.gate_angles(theta, shifts)
        self._schedule = self.circuit.compile()
        self._pos = 0
        self._pending: list[float] = []
        self._qubit = -1
        self.frame = pf.PauliFrame.identity(self.circuit.num_qubits)
        self.valid = True
        self.outcomes: list[int] = []
        self.result: RunResult | None = None

    def _advance_to_round(self) -> None:
        """Follow the public schedule up to the round the next photon belongs to."""
        if self._pending:
            return
        while True:
            op = self._schedule[self._pos]
            self._pos += 1
            if isinstance(op, ServerGate):
                self.frame = pf.conjugate_through_clifford(self.frame, op.name, op.qubits)
                continue
            u = op.rotation.unitary(self._angles[op.gate_index])
            self._pending = list(euler_angles_for(u).rounds())
            self._qubit = op.qubit
            return

    def finish_schedule(self) -> None:
        """Catch the frame up with server gates after the last round."""
        for op in self._schedule[self._pos:]:
            if isinstance(op, ServerGate):
                self.frame = pf.conjugate_through_clifford(self.frame, op.name, op.qubits)
        self._pos = len(self._schedule)

    def receive_photon(self, system: QuantumSystem) -> int:
        self._advance_to_round()
        base = self._pending.pop(0)
        if not self.valid:
            j = system.measure_ancilla(0.0)
            self.outcomes.append(0)
            return j
        j = system.measure_ancilla(pf.adapted_angle(self.frame, self._qubit, base))
        self.frame = pf.absorb_round(self.frame, self._qubit, j)
        self.outcomes.append(j)
        self.on_outcome(self._qubit, j)
        return j

    def photon_lost(self) -> None:
        self._advance_to_round()
        self._pending.pop(0)
        self.valid = False
        self.outcomes.append(0)

    def on_outcome(self, qubit: int, outcome: int) -> None:
        """Hook for test fixtures; the honest client keeps outcomes to itself."""

    def receive_results(self, payload: ClassicalResults) -> RunResult:
        self.finish_schedule()
        corrected = None
        if self.valid:
            corrected = tuple(pf.reinterpret_result(self.frame, o, e)
                              for o, e in zip(self.observables, payload.eigenvalues()))
        self.result = RunResult(self.valid, self.setting, self.observable_indices, corrected)
        return self.result


def run_circuit_instance(ann: Announcement, circuit_index: int, theta, loss: LossModel,
                         rng: np.random.Generator, *, setting: int = 0, shifts=None,
                         server_factory: Callable = Server, client_factory: Callable = Client):
    """One preparation of circuit ``circuit_index`` and one readout of ``setting``.

    Returns ``(RunResult, Transcript)``.
    """
    circuit = ann.circuit(circuit_index)
    nature, channel_rng = rng.spawn(2)
    system = QuantumSystem(circuit.num_qubits, nature)
    channel = Channel(loss, channel_rng)
    client = client_factory(ann, circuit_index, theta, setting, shifts)
    server = server_factory(ann, circuit_index)
    server.run(system, channel, client, setting)
    return client.result, channel.transcript


def blind_prepare(ann: Announcement, circuit_index: int, theta, rng: np.random.Generator, *,
                  shifts=None):
    """Run step 1 only, lossless; returns ``(register state, client frame, server log)``.

    Applying the frame's Pauli to the returned state gives U_AN(theta)|0...0>.
    """
    circuit = ann.circuit(circuit_index)
    nature, channel_rng = rng.spawn(2)
    system = QuantumSystem(circuit.num_qubits, nature)
    client = Client(ann, circuit_index, theta, 0, shifts)
    server = Server(ann, circuit_index)
    server.prepare(system, Channel(LossModel(0.0), channel_rng), client)
    client.finish_schedule()
    return system.state, client.frame, server.log


# -- exact branch enumeration -------------------------------------------------


def apply_matrix_dm(rho: np.ndarray, gate: np.ndarray, targets, n: int) -> np.ndarray:
    """gate . rho . gate^dagger on an n-qubit density tensor of shape (2,)*2n."""
    rows = [n + t for t in targets]
    out = apply_matrix(rho, gate, rows, 2 * n)
    return apply_matrix(out, gate.conj(), list(targets), 2 * n)


@dataclass
class Branch:
    """Client-frame-conditioned register state: probability and normalized rho."""

    frame: pf.PauliFrame
    weight: float
    rho: np.ndarray = field(repr=False)


Feedback = Callable[[int, int], str]


@lru_cache(maxsize=4096)
def _round_kraus(angle: float, qubit: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    out = tuple(operator(k, (qubit,), n) for k in kernel_kraus(angle))
    for k in out:
        k.setflags(write=False)
    return out


def enumerate_branches(circuit: AnsatzSpec, gate_angles, *, stop: int | None = None,
                       feedback: Feedback | None = None) -> list[Branch]:
    """Exact mixture over every client measurement branch.

    Branches are merged by client frame, which is exact: the client's future
    angles and its final reinterpretation depend on nothing else.
    ``feedback(qubit, outcome)`` returns Pauli letters the server applies
    after a round; only leaky test fixtures use it.
    """
    n = circuit.num_qubits
    d = 2**n
    ops: dict = {}

    def full(key, gate, targets):
        if key not in ops:
            ops[key] = operator(gate, targets, n)
        return ops[key]

    start = np.zeros((d, d), dtype=complex)
    start[0, 0] = 1
    branches = {pf.PauliFrame.identity(n): start}
    schedule = circuit.compile()
    if stop is not None:
        schedule = schedule[:stop]
    for op in schedule:
        if isinstance(op, ServerGate):
            g = full((op.name, op.qubits), NAMED_GATES[op.name], op.qubits)
            branches = {pf.conjugate_through_clifford(f, op.name, op.qubits): g @ r @ g.conj().T
                        for f, r in branches.items()}
            continue
        q = op.qubit
        u = op.rotation.unitary(gate_angles[op.gate_index])
        for base in euler_angles_for(u).rounds():
            kraus = {}
            new: dict[pf.PauliFrame, np.ndarray] = {}
            for f, rho in branches.items():
                angle = pf.adapted_angle(f, q, base)
                if angle not in kraus:
                    kraus[angle] = _round_kraus(angle, q, n)
                for j, k in enumerate(kraus[angle]):
                    r = k @ rho @ k.conj().T
                    f2 = pf.absorb_round(f, q, j)
                    if feedback is not None:
                        for letter in feedback(q, j):
                            p = full((letter, q), PAULIS[letter], (q,))
                            r = p @ r @ p.conj().T
                            f2 = pf.absorb_byproduct(f2, q, int(letter in "XY"), int(letter in "ZY"))
                    new[f2] = new[f2] + r if f2 in new else r
            branches = new
    out = []
    for f, r in branches.items():
        w = float(np.trace(r).real)
        if w > 1e-300:
            out.append(Branch(f, w, r / w))
    return out


def exact_expectations(circuit: AnsatzSpec, gate_angles, observables: Sequence[PauliString],
                       corrected: bool = True, branches=None) -> np.ndarray:
    """Branch-averaged expectations; ``corrected`` applies the client's reinterpretation."""
    branches = branches if branches is not None else enumerate_branches(circuit, gate_angles)
    mats = [o.matrix(weighted=False) for o in observables]
    out = np.zeros(len(observables))
    for b in branches:
        for k, (o, m) in enumerate(zip(observables, mats)):
            sign = -1.0 if corrected and pf.anticommutes(b.frame, o) else 1.0
            out[k] += b.weight * sign * np.real(np.trace(m @ b.rho))
    return out


# -- sampling -----------------------------------------------------------------


@dataclass
class Estimates:
    """Per-observable sample means for one circuit."""

    values: np.ndarray
    stderr: np.ndarray
    valid_runs: int
    attempts: int


def attempt_cap(n: int, loss: LossModel, n_ph: int) -> int:
    """Most attempts spent on ``n`` valid runs before giving up."""
    return int(MAX_ATTEMPT_FACTOR * required_repetitions(n, loss, n_ph))


def _draw_attempts(n_valid: int, loss: LossModel, n_ph: int, rng: np.random.Generator) -> int:
    """Attempts until ``n_valid`` runs see no lost photon, drawn per transmission."""
    cap = attempt_cap(n_valid, loss, n_ph)
    if loss.p_loss == 0 or n_ph == 0:
        if cap < n_valid:
            raise AttemptBudgetExceeded(f"attempt cap {cap} is below the {n_valid} runs needed")
        return n_valid
    attempts = valid = 0
    q = loss.success_probability(n_ph)
    while valid < n_valid:
        chunk = int(min(cap - attempts, max(64, 1.2 * (n_valid - valid) / q)))
        if chunk <= 0:
            raise AttemptBudgetExceeded(
                f"only {valid}/{n_valid} valid runs after {attempts} attempts "
                f"(p_loss={loss.p_loss}, N_ph={n_ph})")
        ok = ~loss.sample(rng, (chunk, n_ph)).any(axis=1)
        cum = np.cumsum(ok)
        if valid + cum[-1] >= n_valid:
            return attempts + int(np.searchsorted(cum, n_valid - valid)) + 1
        valid += int(cum[-1])
        attempts += chunk
    return attempts


def estimate_expectations(ann: Announcement, circuit_index: int, theta, loss: LossModel,
                          rng: np.random.Generator, *, method: str = "shots", shifts=None,
                          repetitions: int | None = None, run_kwargs=None) -> Estimates:
    """Average corrected eigenvalues over exactly N valid runs per measurement setting.

    ``method="shots"`` runs the full protocol run by run.  ``method="batched"``
    draws runs from the exact branch distribution of the same protocol, which
    is equivalent in law and much faster.
    """
    circuit = ann.circuit(circuit_index)
    n_req = repetitions or ann.repetitions[circuit_index]
    n_ph = photon_budget(circuit)
    observables = ann.observables[circuit_index]
    settings = ann.settings(circuit_index)
    sums = np.zeros(len(observables))
    sq = np.zeros(len(observables))
    counts = np.zeros(len(observables), dtype=int)
    attempts_total = valid_total = 0
    branches = None
    for s, idx in enumerate(settings):
        if method == "shots":
            cap = attempt_cap(n_req, loss, n_ph)
            valid = attempts = 0
            while valid < n_req:
                if attempts >= cap:
                    raise AttemptBudgetExceeded(
                        f"only {valid}/{n_req} valid runs after {attempts} attempts "
                        f"(p_loss={loss.p_loss}, N_ph={n_ph})")
                res, _ = run_circuit_instance(ann, circuit_index, theta, loss, rng.spawn(1)[0],
                                              setting=s, shifts=shifts, **(run_kwargs or {}))
                attempts += 1
                if res.valid:
                    valid += 1
                    e = np.asarray(res.corrected_eigenvalues, dtype=float)
                    sums[idx] += e
                    sq[idx] += e * e
                    counts[idx] += 1
        elif method == "batched":
            if branches is None:
                branches = enumerate_branches(circuit, circuit.gate_angles(theta, shifts))
            eig = sample_corrected(branches, [observables[k] for k in idx], n_req, rng)
            attempts = _draw_attempts(n_req, loss, n_ph, rng)
            valid = n_req
            sums[idx] += eig.sum(axis=0)
            sq[idx] += (eig * eig).sum(axis=0)
            counts[idx] += n_req
        else:
            raise ValueError(f"unknown sampling method {method!r}")
        attempts_total += attempts
        valid_total += valid
    mean = sums / counts
    var = np.maximum(sq / counts - mean**2, 0.0)
    return Estimates(mean, np.sqrt(var / counts), valid_total, attempts_total)


def readout_distribution(branches: list[Branch], observables: Sequence[PauliString]):
    """Joint probabilities over (branch, computational outcome) for one setting."""
    n = branches[0].frame.num_qubits
    gates = basis_change_gates(observables)
    probs = []
    for b in branches:
        t = b.rho.reshape((2,) * (2 * n))
        for name, q in gates:
            t = apply_matrix_dm(t, NAMED_GATES[name], (q,), n)
        probs.append(b.weight * np.clip(np.real(np.diag(t.reshape(2**n, 2**n))), 0, None))
    return np.array(probs)


def sample_corrected(branches: list[Branch], observables: Sequence[PauliString], shots: int,
                     rng: np.random.Generator, corrected: bool = True) -> np.ndarray:
    """``shots`` x K eigenvalues drawn from the protocol's exact outcome law."""
    n = branches[0].frame.num_qubits
    joint = readout_distribution(branches, observables)
    flat = joint.reshape(-1)
    picks = rng.choice(flat.size, size=shots, p=flat / flat.sum())
    b_idx, outcome = np.divmod(picks, 2**n)
    bits = (outcome[:, None] >> np.arange(n)) & 1
    out = np.empty((shots, len(observables)))
    for k, o in enumerate(observables):
        raw = 1 - 2 * (bits[:, list(o.support)].sum(axis=1) & 1) if o.support else np.ones(shots)
        if corrected:
            flip = np.array([-1.0 if pf.anticommutes(b.frame, o) else 1.0 for b in branches])
            raw = raw * flip[b_idx]
        out[:, k] = raw
    return out


