"""Blindness and loss verifiers.

The exact checks enumerate every client measurement branch and compare the
server's averaged register state against I/2^N and across parameter sets.
The statistical checks look only at data the server can see.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from math import sqrt
from typing import Callable, Union

import numpy as np

from .protocol import (
    Announcement,
    ClassicalResults,
    Client,
    Feedback,
    LossModel,
    Server,
    enumerate_branches,
    photon_budget,
    run_circuit_instance,
    sample_corrected,
)
from .statevec import DensityMatrix, trace_distance

MAX_AUDIT_QUBITS = 3
BLINDNESS_THRESHOLD = 1e-10
CHECKPOINTS = ("after-each-qubit-rotated", "end-of-circuit")

Checkpoint = Union[str, int]


class AuditSizeError(ValueError):
    """The exact branch enumeration is restricted to small registers."""


def _stop_index(circuit, checkpoint: Checkpoint) -> int | None:
    if isinstance(checkpoint, (int, np.integer)):
        return int(checkpoint)
    if checkpoint == "end-of-circuit":
        return None
    if checkpoint == "after-each-qubit-rotated":
        stop = circuit.rotated_checkpoint()
        if stop is None:
            raise ValueError("some register qubit never receives a full rotation block")
        return stop
    raise ValueError(f"unknown checkpoint {checkpoint!r}; expected one of {CHECKPOINTS}")


def server_view_density(ann: Announcement, circuit_index: int, theta,
                        checkpoint: Checkpoint = "end-of-circuit",
                        feedback: Feedback | None = None) -> DensityMatrix:
    """Register state averaged over all client outcomes, as the server holds it.

    ``checkpoint`` may also be a position in the compiled schedule.
    """
    circuit = ann.circuit(circuit_index)
    if circuit.num_qubits > MAX_AUDIT_QUBITS:
        raise AuditSizeError(
            f"exact audit supports at most {MAX_AUDIT_QUBITS} register qubits, circuit "
            f"{circuit_index} has {circuit.num_qubits}; use the sampled outcome test instead")
    branches = enumerate_branches(circuit, circuit.gate_angles(theta),
                                  stop=_stop_index(circuit, checkpoint), feedback=feedback)
    rho = sum(b.weight * b.rho for b in branches)
    return DensityMatrix(rho, validate=False)


@dataclass(frozen=True)
class BlindnessReport:
    distance_to_mixed_a: float
    distance_to_mixed_b: float
    distance_between: float
    threshold: float

    @property
    def passed(self) -> bool:
        return max(self.distance_to_mixed_a, self.distance_to_mixed_b,
                   self.distance_between) <= self.threshold


def blindness_report(ann: Announcement, circuit_index: int, theta_a, theta_b,
                     checkpoint: Checkpoint = "after-each-qubit-rotated",
                     feedback: Feedback | None = None,
                     threshold: float = BLINDNESS_THRESHOLD) -> BlindnessReport:
    va = server_view_density(ann, circuit_index, theta_a, checkpoint, feedback)
    vb = server_view_density(ann, circuit_index, theta_b, checkpoint, feedback)
    mixed = DensityMatrix.maximally_mixed(ann.circuit(circuit_index).num_qubits)
    return BlindnessReport(trace_distance(va, mixed), trace_distance(vb, mixed),
                           trace_distance(va, vb), threshold)


def blindness_distance(ann: Announcement, circuit_index: int, theta_a, theta_b,
                       checkpoint: Checkpoint = "after-each-qubit-rotated",
                       feedback: Feedback | None = None) -> float:
    va = server_view_density(ann, circuit_index, theta_a, checkpoint, feedback)
    vb = server_view_density(ann, circuit_index, theta_b, checkpoint, feedback)
    return trace_distance(va, vb)


@dataclass(frozen=True)
class DistributionTestReport:
    tv_distance: float
    shots_a: int
    shots_b: int
    alphabet_size: int
    threshold: float

    @property
    def passed(self) -> bool:
        return self.tv_distance < self.threshold


def _server_bits_shots(ann, ci, theta, shots, rng, setting, server_factory, client_factory):
    counts: Counter = Counter()
    for r in rng.spawn(shots):
        _, transcript = run_circuit_instance(ann, ci, theta, LossModel(0.0), r, setting=setting,
                                             server_factory=server_factory,
                                             client_factory=client_factory)
        results = [e.message.payload for e in transcript
                   if isinstance(e.message.payload, ClassicalResults)]
        counts[results[-1].bits()] += 1
    return counts


def _server_bits_batched(ann, ci, theta, shots, rng, setting, feedback):
    circuit = ann.circuit(ci)
    observables = [ann.observables[ci][k] for k in ann.settings(ci)[setting]]
    branches = enumerate_branches(circuit, circuit.gate_angles(theta), feedback=feedback)
    eig = sample_corrected(branches, observables, shots, rng, corrected=False)
    bits = ((1 - eig) // 2).astype(int)
    return Counter("".join(map(str, row)) for row in bits)


def outcome_distribution_test(ann: Announcement, circuit_index: int, theta_a, theta_b,
                              shots: int, rng: np.random.Generator, *, setting: int = 0,
                              method: str = "shots", server_factory: Callable = Server,
                              client_factory: Callable = Client,
                              feedback: Feedback | None = None) -> DistributionTestReport:
    """Empirical TV distance between the raw eigenvalues the server reports at two thetas.

    ``method="shots"`` reads the bits out of full-run transcripts;
    ``method="batched"`` samples them from the exact branch mixture.
    Passes iff TV < 4 * sqrt(k / shots) with k the outcome alphabet size.
    """
    if shots < 1000:
        raise ValueError("outcome_distribution_test needs at least 1000 shots")
    k = 2 ** len(ann.settings(circuit_index)[setting])
    ra, rb = rng.spawn(2)
    if method == "shots":
        ca = _server_bits_shots(ann, circuit_index, theta_a, shots, ra, setting,
                                server_factory, client_factory)
        cb = _server_bits_shots(ann, circuit_index, theta_b, shots, rb, setting,
                                server_factory, client_factory)
    elif method == "batched":
        ca = _server_bits_batched(ann, circuit_index, theta_a, shots, ra, setting, feedback)
        cb = _server_bits_batched(ann, circuit_index, theta_b, shots, rb, setting, feedback)
    else:
        raise ValueError(f"unknown method {method!r}")
    keys = set(ca) | set(cb)
    tv = 0.5 * sum(abs(ca[x] / shots - cb[x] / shots) for x in keys)
    return DistributionTestReport(tv, shots, shots, k, 4 * sqrt(k / shots))


@dataclass(frozen=True)
class LossReport:
    p_loss: float
    n_ph: int
    trials: int
    successes: int
    predicted: float

    @property
    def empirical(self) -> float:
        return self.successes / self.trials

    @property
    def sigma(self) -> float:
        return sqrt(self.predicted * (1 - self.predicted) / self.trials)

    @property
    def within_3sigma(self) -> bool:
        # Tiny slack so that a zero-variance grid point (p = 0) compares exactly.
        return abs(self.empirical - self.predicted) <= 3 * self.sigma + 1e-12


def loss_statistics_for_budget(loss: LossModel, n_ph: int, trials: int,
                               rng: np.random.Generator) -> LossReport:
    """Fraction of runs in which all ``n_ph`` photons arrive; one draw per photon."""
    if trials < 1000:
        raise ValueError("loss statistics need at least 1000 trials")
    lost = loss.sample(rng, (trials, n_ph))
    successes = int((~lost.any(axis=1)).sum()) if n_ph else trials
    return LossReport(loss.p_loss, n_ph, trials, successes, loss.success_probability(n_ph))


def loss_statistics(ann: Announcement, circuit_index: int, loss: LossModel, trials: int,
                    rng: np.random.Generator) -> LossReport:
    return loss_statistics_for_budget(loss, photon_budget(ann.circuit(circuit_index)),
                                      trials, rng)
