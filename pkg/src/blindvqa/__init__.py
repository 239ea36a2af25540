"""Simulation of blind variational quantum algorithms with ancilla-driven gates.

The client never signals the server during a computation: the server sends
ancilla photons, the client measures them at angles it keeps private, and
the client undoes the resulting Pauli byproducts by reinterpreting the
server's final measurement results.
"""
from .ansatz import AnsatzSpec, FixedGate, ParamGate
from .pauli_frame import PauliFrame
from .protocol import (
    Announcement,
    LossModel,
    Transcript,
    announce,
    estimate_expectations,
    photon_budget,
    required_repetitions,
    run_circuit_instance,
    transcript_no_signaling_check,
)
from .statevec import DensityMatrix, PauliString, StateVector
from .vqa import CostSpec, OptimizerConfig, evaluate_cost, gradient, run_vqa

__all__ = [
    "Announcement",
    "AnsatzSpec",
    "CostSpec",
    "DensityMatrix",
    "FixedGate",
    "LossModel",
    "OptimizerConfig",
    "ParamGate",
    "PauliFrame",
    "PauliString",
    "StateVector",
    "Transcript",
    "announce",
    "estimate_expectations",
    "evaluate_cost",
    "gradient",
    "photon_budget",
    "required_repetitions",
    "run_circuit_instance",
    "run_vqa",
    "transcript_no_signaling_check",
]

__version__ = "0.1.0"
