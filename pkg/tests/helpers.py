"""Shared builders for the test suite, including the deliberately leaky fixture."""
from __future__ import annotations

import numpy as np

from blindvqa import pauli_frame as pf
from blindvqa.ansatz import AnsatzSpec, FixedGate, ParamGate
from blindvqa.protocol import Client, Server, announce
from blindvqa.statevec import PauliString


def random_circuit(rng: np.random.Generator, max_qubits: int = 4, max_param_gates: int = 8,
                   min_qubits: int = 1, allow_controlled: bool = True) -> AnsatzSpec:
    """Interleaved {H, S, CZ} layers and parameterized gates with random axes."""
    n = int(rng.integers(min_qubits, max_qubits + 1))
    n_param = int(rng.integers(1, max_param_gates + 1))
    L = int(rng.integers(1, n_param + 1))
    params = list(range(L)) + list(rng.integers(0, L, size=n_param - L))
    rng.shuffle(params)
    gates = []
    for p in params:
        for _ in range(int(rng.integers(0, 3))):
            kind = rng.choice(["H", "S", "CZ"] if n > 1 else ["H", "S"])
            if kind == "CZ":
                a, b = rng.choice(n, size=2, replace=False)
                gates.append(FixedGate("CZ", (int(a), int(b))))
            else:
                gates.append(FixedGate(str(kind), (int(rng.integers(n)),)))
        axis = str(rng.choice(["X", "Y", "Z"]))
        if allow_controlled and n > 1 and rng.random() < 0.3:
            c, t = rng.choice(n, size=2, replace=False)
            gates.append(ParamGate("controlled", axis, (int(c), int(t)), int(p)))
        else:
            gates.append(ParamGate("rotation", axis, (int(rng.integers(n)),), int(p)))
    return AnsatzSpec(n, L, tuple(gates))


class Forced:
    """Stands in for a Generator so a branch can be selected by outcome."""

    def __init__(self, outcomes):
        self.outcomes = list(outcomes)

    def random(self):
        # measure_qubit picks 0 iff random() < p0; both outcomes have p = 1/2 here
        return 0.0 if self.outcomes.pop(0) == 0 else 1.0 - 1e-15


def single_circuit_announcement(circuit: AnsatzSpec, observables=None, repetitions: int = 1,
                                iterations: int = 1):
    if observables is None:
        observables = ["Z" * circuit.num_qubits]
    return announce([circuit], [[PauliString(o) if isinstance(o, str) else o
                                 for o in observables]],
                    [repetitions], circuit.num_parameters, iterations)


def leak_feedback(qubit: int, outcome: int) -> str:
    """Exact-enumeration form of the leak: the server undoes X^j after each round."""
    return "X" * outcome


def make_leaky_pair():
    """(server_factory, client_factory) where the client tells the server every j.

    The server uses the leaked outcome to undo X^j physically and the client
    adjusts its frame to match, so results stay correct but blindness is lost.
    """
    leaked: list[int] = []

    class LeakyClient(Client):
        def on_outcome(self, qubit, outcome):
            leaked.append(outcome)
            self.frame = pf.absorb_byproduct(self.frame, qubit, outcome, 0)

    class LeakyServer(Server):
        def after_round(self, system, channel, qubit):
            if leaked and leaked.pop():
                system.apply(np.array([[0, 1], [1, 0]], dtype=complex), (qubit,))

    return LeakyServer, LeakyClient
