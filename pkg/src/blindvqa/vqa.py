"""Cost evaluation through the blind protocol, gradients and gradient descent."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import isfinite, pi, sqrt

import numpy as np

from .ansatz import CONTROLLED, ParamGate, ising_ansatz
from .protocol import (
    Announcement,
    AttemptBudgetExceeded,
    LossModel,
    estimate_expectations,
    exact_expectations,
)
from .statevec import PauliString, expectation

# Four-term shift rule for controlled rotations (generator eigenvalues 0, +-1/2).
_C_PLUS = (sqrt(2) + 1) / (4 * sqrt(2))
_C_MINUS = (sqrt(2) - 1) / (4 * sqrt(2))


@dataclass(frozen=True)
class CostTerm:
    observable: PauliString
    weight: float
    circuit_index: int = 0


@dataclass(frozen=True)
class CostSpec:
    """C(theta) = sum of weight * <observable> over the terms."""

    terms: tuple[CostTerm, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ValueError("cost needs at least one term")
        for t in self.terms:
            if not isfinite(t.weight):
                raise ValueError(f"non-finite weight on {t.observable.letters}")

    @classmethod
    def from_pairs(cls, pairs, circuit_index: int = 0) -> CostSpec:
        """``[(weight, "ZZ"), ...]`` on a single circuit."""
        return cls(tuple(CostTerm(PauliString(s), float(w), circuit_index) for w, s in pairs))

    def observables(self, circuit_index: int = 0) -> list[PauliString]:
        seen = []
        for t in self.terms:
            if t.circuit_index == circuit_index and t.observable not in seen:
                seen.append(t.observable)
        return seen

    def matrix(self, circuit_index: int = 0) -> np.ndarray:
        mats = [t.weight * t.observable.matrix(weighted=False)
                for t in self.terms if t.circuit_index == circuit_index]
        return sum(mats)

    def ground_energy(self, circuit_index: int = 0) -> float:
        return float(np.linalg.eigvalsh(self.matrix(circuit_index))[0])

    def direct_value(self, circuits, theta) -> float:
        """Cost of the ideal states, simulated without the protocol."""
        states = {}
        total = 0.0
        for t in self.terms:
            if t.circuit_index not in states:
                states[t.circuit_index] = circuits[t.circuit_index].prepare_direct(theta)
            total += t.weight * expectation(states[t.circuit_index], t.observable)
        return total


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 0.1
    iterations: int = 200
    gradient_mode: str = "parameter-shift"
    step: float = 1e-5
    early_stop: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be > 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.gradient_mode not in ("parameter-shift", "central-difference"):
            raise ValueError(f"unknown gradient mode {self.gradient_mode!r}")
        if self.gradient_mode == "central-difference" and not self.step > 0:
            raise ValueError("central-difference step must be > 0")


@dataclass
class CostEvaluation:
    value: float
    valid_runs: int = 0
    attempts: int = 0

    def __float__(self) -> float:
        return self.value


def _term_index(ann: Announcement, term: CostTerm) -> int:
    obs = ann.observables[term.circuit_index]
    try:
        return obs.index(PauliString(term.observable.letters))
    except ValueError:
        raise ValueError(f"cost term {term.observable.letters} is not an announced observable "
                         f"of circuit {term.circuit_index}") from None


def cost_evaluation(ann: Announcement, cost: CostSpec, theta, loss: LossModel,
                    rng: np.random.Generator, exact: bool = False, *, shifts=None,
                    method: str = "batched") -> CostEvaluation:
    """Cost from protocol-mediated expectations.

    ``exact=True`` averages the client's corrected expectations over every
    measurement branch of the same protocol instead of sampling.  ``shifts``
    maps circuit index to per-gate-occurrence angle offsets.
    """
    shifts = shifts or {}
    out = CostEvaluation(0.0)
    for ci in sorted({t.circuit_index for t in cost.terms}):
        circuit = ann.circuit(ci)
        if exact:
            values = exact_expectations(circuit, circuit.gate_angles(theta, shifts.get(ci)),
                                        ann.observables[ci])
        else:
            est = estimate_expectations(ann, ci, theta, loss, rng, method=method,
                                        shifts=shifts.get(ci))
            values = est.values
            out.valid_runs += est.valid_runs
            out.attempts += est.attempts
        for t in cost.terms:
            if t.circuit_index == ci:
                out.value += t.weight * values[_term_index(ann, t)]
    return out


def evaluate_cost(ann: Announcement, cost: CostSpec, theta, loss: LossModel,
                  rng: np.random.Generator, exact: bool = False, **kw) -> float:
    return cost_evaluation(ann, cost, theta, loss, rng, exact, **kw).value


def _shift_terms(gate: ParamGate) -> list[tuple[float, float]]:
    """(coefficient, shift) pairs whose weighted sum is d<C>/d(angle)."""
    if gate.kind == CONTROLLED:
        return [(_C_PLUS, pi / 2), (-_C_PLUS, -pi / 2),
                (-_C_MINUS, 3 * pi / 2), (_C_MINUS, -3 * pi / 2)]
    return [(0.5, pi / 2), (-0.5, -pi / 2)]


def gradient(ann: Announcement, cost: CostSpec, theta, loss: LossModel,
             rng: np.random.Generator, config: OptimizerConfig, exact: bool = False,
             method: str = "batched", stats: CostEvaluation | None = None) -> np.ndarray:
    """dC/dtheta from shifted or perturbed protocol evaluations.

    Parameter-shift mode shifts one gate occurrence at a time and sums the
    contributions into that occurrence's parameter; for a parameter used by a
    single rotation this is 0.5 * [C(theta + pi/2 e_k) - C(theta - pi/2 e_k)].
    """
    theta = np.asarray(theta, dtype=float)
    grad = np.zeros(ann.num_parameters)

    def ev(**kw) -> float:
        e = cost_evaluation(ann, cost, kw.pop("th", theta), loss, rng, exact,
                            method=method, **kw)
        if stats is not None:
            stats.valid_runs += e.valid_runs
            stats.attempts += e.attempts
        return e.value

    if config.gradient_mode == "central-difference":
        h = config.step
        for k in range(ann.num_parameters):
            e = np.zeros_like(theta)
            e[k] = h
            grad[k] = (ev(th=theta + e) - ev(th=theta - e)) / (2 * h)
        return grad

    for ci in sorted({t.circuit_index for t in cost.terms}):
        gates = ann.circuit(ci).param_gates
        for occ, gate in enumerate(gates):
            for coeff, s in _shift_terms(gate):
                shift = np.zeros(len(gates))
                shift[occ] = s
                grad[gate.param] += coeff * ev(shifts={ci: shift})
    return grad


@dataclass
class TraceRow:
    iteration: int
    theta: np.ndarray
    cost: float
    valid_runs: int
    attempts: int


@dataclass
class VQATrace:
    rows: list[TraceRow] = field(default_factory=list)
    aborted: str | None = None

    @property
    def final_cost(self) -> float:
        return self.rows[-1].cost if self.rows else float("nan")

    @property
    def total_attempts(self) -> int:
        return sum(r.attempts for r in self.rows)

    def write_csv(self, path) -> None:
        L = len(self.rows[0].theta) if self.rows else 0
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", *[f"theta_{k + 1}" for k in range(L)], "cost",
                        "valid_runs", "attempts"])
            for r in self.rows:
                w.writerow([r.iteration, *[repr(float(t)) for t in r.theta], repr(float(r.cost)),
                            r.valid_runs, r.attempts])


def run_vqa(ann: Announcement, cost: CostSpec, theta0, loss: LossModel, config: OptimizerConfig,
            rng: np.random.Generator, exact: bool = False, method: str = "batched") -> VQATrace:
    """Plain gradient descent, theta[j+1] = theta[j] - alpha * grad C(theta[j]).

    Row j holds theta[j] and C(theta[j]) for j = 1..M.  In exact mode the loop
    stops early once |C(theta[j]) - C(theta[j-1])| < config.early_stop.  An
    exhausted attempt budget ends the trace and is recorded in ``aborted``.
    """
    theta = np.array(theta0, dtype=float)
    if theta.shape != (ann.num_parameters,):
        raise ValueError(f"initial theta must have length {ann.num_parameters}")
    trace = VQATrace()
    prev = None
    for j in range(1, config.iterations + 1):
        stats = CostEvaluation(0.0)
        row = None
        stop = j == config.iterations
        try:
            c = cost_evaluation(ann, cost, theta, loss, rng, exact, method=method)
            stats.valid_runs, stats.attempts = c.valid_runs, c.attempts
            row = TraceRow(j, theta.copy(), c.value, 0, 0)
            trace.rows.append(row)
            if exact and prev is not None and abs(c.value - prev) < config.early_stop:
                stop = True
            if not stop:
                g = gradient(ann, cost, theta, loss, rng, config, exact, method, stats)
        except AttemptBudgetExceeded as err:
            trace.aborted = f"iteration {j}: {err}"
            stop = True
        if row is not None:
            row.valid_runs, row.attempts = stats.valid_runs, stats.attempts
        if stop:
            break
        prev = c.value
        theta = theta - config.learning_rate * g
    return trace


def ising_cost(field_strength: float = 0.5) -> CostSpec:
    """-Z1 Z2 - h (X1 + X2)."""
    return CostSpec.from_pairs([(-1.0, "ZZ"), (-field_strength, "XI"), (-field_strength, "IX")])


ISING_THETA0 = (1.2, -0.7, 0.4, 0.9)


def ising_benchmark(repetitions: int = 10_000, iterations: int = 200):
    """(announcement, cost, initial theta) for the 2-qubit transverse-field Ising VQE."""
    from .protocol import announce

    cost = ising_cost()
    ann = announce([ising_ansatz()], [cost.observables()], [repetitions], 4, iterations)
    return ann, cost, np.array(ISING_THETA0)
