"""YAML experiment configs with line/column diagnostics.

Scalars are typed by the schema rather than by YAML's resolver, so ``1e-5``
is a float wherever a float is expected.  See ``configs/ising.yaml`` for a
complete example.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .ansatz import AnsatzSpec, FixedGate, ParamGate
from .protocol import Announcement, announce
from .statevec import PauliString
from .vqa import CostSpec, CostTerm, OptimizerConfig


class ConfigError(ValueError):
    def __init__(self, message: str, node=None, source: str = "<config>"):
        self.line = node.start_mark.line + 1 if node is not None else None
        self.column = node.start_mark.column + 1 if node is not None else None
        where = f"{source}:{self.line}:{self.column}" if node is not None else source
        super().__init__(f"{where}: {message}")


@dataclass
class AuditSection:
    checkpoint: str = "after-each-qubit-rotated"
    theta_pairs: list[tuple[np.ndarray, np.ndarray]] | None = None
    random_pairs: int = 20
    threshold: float = 1e-10


@dataclass
class LossSweepSection:
    p_loss: list[float] = field(default_factory=lambda: [0.001, 0.01, 0.05])
    n_ph: list[int] | None = None
    trials: int = 10_000


@dataclass
class SampleSection:
    circuit: int = 0
    shots: int = 1000
    theta: np.ndarray | None = None
    p_loss: float = 0.0


@dataclass
class ExperimentConfig:
    announcement: Announcement
    cost: CostSpec | None
    optimizer: OptimizerConfig
    initial_theta: np.ndarray
    mode: str
    p_loss: float
    audit: AuditSection
    loss_sweep: LossSweepSection
    sample: SampleSection
    benchmark: str | None = None


_GATE = re.compile(r"^(H|S|CZ|RX|RY|RZ|CRX|CRY|CRZ)$")
_PARAM = re.compile(r"^t(\d+)$")


class _Reader:
    def __init__(self, source: str):
        self.source = source

    def fail(self, message: str, node):
        raise ConfigError(message, node, self.source)

    def mapping(self, node, what: str) -> dict:
        if not isinstance(node, yaml.MappingNode):
            self.fail(f"{what} must be a mapping", node)
        out = {}
        for k, v in node.value:
            if not isinstance(k, yaml.ScalarNode):
                self.fail("mapping keys must be plain names", k)
            if k.value in out:
                self.fail(f"duplicate key {k.value!r}", k)
            out[k.value] = (k, v)
        return out

    def check_keys(self, m: dict, allowed, what: str) -> None:
        for key, (knode, _) in m.items():
            if key not in allowed:
                self.fail(f"unknown key {key!r} in {what}; expected one of {sorted(allowed)}", knode)

    def seq(self, node, what: str) -> list:
        if not isinstance(node, yaml.SequenceNode):
            self.fail(f"{what} must be a list", node)
        return node.value

    def scalar(self, node, what: str) -> str:
        if not isinstance(node, yaml.ScalarNode):
            self.fail(f"{what} must be a single value", node)
        return node.value

    def number(self, node, what: str, kind=float):
        text = self.scalar(node, what)
        try:
            return kind(text)
        except ValueError:
            self.fail(f"{what} must be {'an integer' if kind is int else 'a number'}, got {text!r}",
                      node)

    def floats(self, node, what: str) -> list[float]:
        return [self.number(n, what) for n in self.seq(node, what)]


def _parse_gate(r: _Reader, node, n_qubits: int):
    text = r.scalar(node, "gate")
    tokens = text.split()
    if not tokens or not _GATE.match(tokens[0].upper()):
        r.fail(f"unknown gate {tokens[0] if tokens else text!r}", node)
    name = tokens[0].upper()
    arity = 2 if name in ("CZ", "CRX", "CRY", "CRZ") else 1
    param = name[0] == "R" or name.startswith("CR")
    expected = 1 + arity + int(param)
    if len(tokens) != expected:
        r.fail(f"gate {name} takes {arity} qubit(s){' and a parameter tK' if param else ''}: {text!r}",
               node)
    qubits = []
    for tok in tokens[1:1 + arity]:
        if not tok.isdigit():
            r.fail(f"bad qubit index {tok!r} in {text!r}", node)
        qubits.append(int(tok))
    try:
        if not param:
            return FixedGate(name, tuple(qubits))
        m = _PARAM.match(tokens[-1])
        if not m:
            r.fail(f"bad parameter token {tokens[-1]!r}; expected t0, t1, ...", node)
        kind = "controlled" if name.startswith("CR") else "rotation"
        return ParamGate(kind, name[-1], tuple(qubits), int(m.group(1)))
    except ValueError as err:
        if isinstance(err, ConfigError):
            raise
        r.fail(str(err), node)


def _observable(r: _Reader, node) -> PauliString:
    text = r.scalar(node, "observable")
    bad = [c for c in text if c not in "IXYZ"]
    if bad or not text:
        r.fail(f"unknown observable letter {bad[0] if bad else ''!r} in token {text!r}", node)
    return PauliString(text)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config: {err.strerror}", None, str(path)) from None
    return parse_config(text, str(path))


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    r = _Reader(source)
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as err:
        mark = err.problem_mark
        raise ConfigError(f"YAML syntax error: {err.problem}",
                          _Mark(mark) if mark is not None else None, source) from None
    if root is None:
        raise ConfigError("empty config", None, source)
    top = r.mapping(root, "config")
    r.check_keys(top, {"circuits", "cost", "iterations", "mode", "p_loss", "optimizer", "audit",
                       "loss_sweep", "sample", "benchmark"}, "config")
    if "circuits" not in top:
        r.fail("missing required key 'circuits'", root)

    circuits, observables, reps = [], [], []
    for cnode in r.seq(top["circuits"][1], "circuits"):
        c = r.mapping(cnode, "circuit")
        r.check_keys(c, {"name", "qubits", "parameters", "gates", "observables", "repetitions"},
                     "circuit")
        for key in ("qubits", "parameters", "observables"):
            if key not in c:
                r.fail(f"circuit is missing {key!r}", cnode)
        n = r.number(c["qubits"][1], "qubits", int)
        L = r.number(c["parameters"][1], "parameters", int)
        gates = [_parse_gate(r, g, n) for g in r.seq(c["gates"][1], "gates")] if "gates" in c else []
        try:
            circuits.append(AnsatzSpec(n, L, tuple(gates)))
        except ValueError as err:
            r.fail(str(err), c["gates"][1] if "gates" in c else cnode)
        obs = [_observable(r, o) for o in r.seq(c["observables"][1], "observables")]
        for o, onode in zip(obs, c["observables"][1].value):
            if len(o) != n:
                r.fail(f"observable {o.letters!r} has length {len(o)}, circuit has {n} qubits",
                       onode)
        observables.append(obs)
        reps.append(r.number(c["repetitions"][1], "repetitions", int) if "repetitions" in c
                    else 1000)

    Ls = {c.num_parameters for c in circuits}
    if len(Ls) > 1:
        r.fail(f"circuits disagree on the parameter count L: {sorted(Ls)}", top["circuits"][1])
    L = Ls.pop() if Ls else 0
    iterations = r.number(top["iterations"][1], "iterations", int) if "iterations" in top else 200

    cost = None
    if "cost" in top:
        terms = []
        for tnode in r.seq(top["cost"][1], "cost"):
            t = r.mapping(tnode, "cost term")
            r.check_keys(t, {"weight", "observable", "circuit"}, "cost term")
            if "observable" not in t:
                r.fail("cost term is missing 'observable'", tnode)
            ci = r.number(t["circuit"][1], "circuit", int) if "circuit" in t else 0
            if not 0 <= ci < len(circuits):
                r.fail(f"cost term refers to circuit {ci}, only {len(circuits)} defined", tnode)
            o = _observable(r, t["observable"][1])
            if o not in observables[ci]:
                r.fail(f"cost observable {o.letters!r} is not announced for circuit {ci}",
                       t["observable"][1])
            w = r.number(t["weight"][1], "weight") if "weight" in t else 1.0
            terms.append(CostTerm(o, w, ci))
        cost = CostSpec(tuple(terms))

    opt_kw, theta0 = {}, None
    if "optimizer" in top:
        o = r.mapping(top["optimizer"][1], "optimizer")
        r.check_keys(o, {"learning_rate", "gradient", "step", "early_stop", "initial_theta"},
                     "optimizer")
        if "learning_rate" in o:
            opt_kw["learning_rate"] = r.number(o["learning_rate"][1], "learning_rate")
        if "gradient" in o:
            opt_kw["gradient_mode"] = r.scalar(o["gradient"][1], "gradient")
        if "step" in o:
            opt_kw["step"] = r.number(o["step"][1], "step")
        if "early_stop" in o:
            opt_kw["early_stop"] = r.number(o["early_stop"][1], "early_stop")
        if "initial_theta" in o:
            theta0 = np.array(r.floats(o["initial_theta"][1], "initial_theta"))
            if theta0.shape != (L,):
                r.fail(f"initial_theta needs {L} entries", o["initial_theta"][1])
    try:
        optimizer = OptimizerConfig(iterations=iterations, **opt_kw)
    except ValueError as err:
        r.fail(str(err), top.get("optimizer", top.get("iterations", (None, root)))[1])
    if theta0 is None:
        theta0 = np.zeros(L)

    try:
        ann = announce(circuits, observables, reps, L, iterations)
    except ValueError as err:
        r.fail(str(err), top["circuits"][1])

    mode = r.scalar(top["mode"][1], "mode") if "mode" in top else "exact"
    if mode not in ("exact", "sampled"):
        r.fail(f"mode must be 'exact' or 'sampled', got {mode!r}", top["mode"][1])
    p_loss = r.number(top["p_loss"][1], "p_loss") if "p_loss" in top else 0.0
    if not 0 <= p_loss < 1:
        r.fail("p_loss must be in [0, 1)", top["p_loss"][1])

    audit = AuditSection()
    if "audit" in top:
        a = r.mapping(top["audit"][1], "audit")
        r.check_keys(a, {"checkpoint", "theta_pairs", "random_pairs", "threshold"}, "audit")
        if "checkpoint" in a:
            audit.checkpoint = r.scalar(a["checkpoint"][1], "checkpoint")
            if audit.checkpoint not in ("after-each-qubit-rotated", "end-of-circuit"):
                r.fail(f"unknown checkpoint {audit.checkpoint!r}", a["checkpoint"][1])
        if "random_pairs" in a:
            audit.random_pairs = r.number(a["random_pairs"][1], "random_pairs", int)
        if "threshold" in a:
            audit.threshold = r.number(a["threshold"][1], "threshold")
        if "theta_pairs" in a:
            pairs = []
            for pnode in r.seq(a["theta_pairs"][1], "theta_pairs"):
                pair = r.seq(pnode, "theta pair")
                if len(pair) != 2:
                    r.fail("each theta pair needs exactly two parameter lists", pnode)
                ta, tb = (np.array(r.floats(x, "theta")) for x in pair)
                if ta.shape != (L,) or tb.shape != (L,):
                    r.fail(f"theta pair entries need {L} values each", pnode)
                pairs.append((ta, tb))
            audit.theta_pairs = pairs

    sweep = LossSweepSection()
    if "loss_sweep" in top:
        s = r.mapping(top["loss_sweep"][1], "loss_sweep")
        r.check_keys(s, {"p_loss", "n_ph", "trials"}, "loss_sweep")
        if "p_loss" in s:
            sweep.p_loss = r.floats(s["p_loss"][1], "p_loss")
            for v, vnode in zip(sweep.p_loss, s["p_loss"][1].value):
                if not 0 <= v < 1:
                    r.fail("p_loss values must be in [0, 1)", vnode)
        if "n_ph" in s:
            sweep.n_ph = [r.number(x, "n_ph", int) for x in r.seq(s["n_ph"][1], "n_ph")]
        if "trials" in s:
            sweep.trials = r.number(s["trials"][1], "trials", int)

    sample = SampleSection()
    if "sample" in top:
        s = r.mapping(top["sample"][1], "sample")
        r.check_keys(s, {"circuit", "shots", "theta", "p_loss"}, "sample")
        if "circuit" in s:
            sample.circuit = r.number(s["circuit"][1], "circuit", int)
            if not 0 <= sample.circuit < len(circuits):
                r.fail(f"sample circuit {sample.circuit} is not defined", s["circuit"][1])
        if "shots" in s:
            sample.shots = r.number(s["shots"][1], "shots", int)
        if "theta" in s:
            sample.theta = np.array(r.floats(s["theta"][1], "theta"))
            if sample.theta.shape != (L,):
                r.fail(f"sample theta needs {L} entries", s["theta"][1])
        if "p_loss" in s:
            sample.p_loss = r.number(s["p_loss"][1], "p_loss")

    benchmark = r.scalar(top["benchmark"][1], "benchmark") if "benchmark" in top else None
    return ExperimentConfig(ann, cost, optimizer, theta0, mode, p_loss, audit, sweep, sample,
                            benchmark)


class _Mark:
    """Adapter so a bare yaml Mark can be reported like a node."""

    def __init__(self, mark):
        self.start_mark = mark
