from pathlib import Path
import textwrap

import numpy as np
import pytest

from blindvqa.config import ConfigError, load_config, parse_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

MINIMAL = """\
circuits:
  - qubits: 1
    parameters: 1
    gates: [RY 0 t0]
    observables: [Z]
"""


def parse(text):
    return parse_config(textwrap.dedent(text), "test.yaml")


def test_shipped_example_loads():
    cfg = load_config(CONFIGS / "ising.yaml")
    ann = cfg.announcement
    assert ann.num_parameters == 4 and ann.num_iterations == 200
    assert [o.letters for o in ann.observables[0]] == ["ZZ", "XI", "IX"]
    assert ann.repetitions == (10_000,)
    assert cfg.cost.ground_energy() == pytest.approx(-np.sqrt(2))
    assert np.array_equal(cfg.initial_theta, [1.2, -0.7, 0.4, 0.9])
    assert cfg.optimizer.step == 1e-5 and cfg.optimizer.early_stop == 1e-8
    assert cfg.mode == "exact" and cfg.benchmark == "ising"
    assert cfg.loss_sweep.n_ph == [3, 12, 24]
    assert cfg.sample.p_loss == 0.01


def test_defaults():
    cfg = parse(MINIMAL)
    assert cfg.cost is None and cfg.mode == "exact" and cfg.p_loss == 0.0
    assert cfg.announcement.repetitions == (1000,)
    assert cfg.optimizer.iterations == 200 and cfg.optimizer.learning_rate == 0.1
    assert np.array_equal(cfg.initial_theta, [0.0])
    assert cfg.audit.theta_pairs is None and cfg.audit.random_pairs == 20
    assert cfg.loss_sweep.n_ph is None


def test_all_gate_forms():
    cfg = parse("""\
        circuits:
          - qubits: 2
            parameters: 2
            gates: [H 0, S 1, CZ 0 1, RX 0 t0, RZ 1 t1, CRX 0 1 t0, CRY 1 0 t1, CRZ 0 1 t0]
            observables: [ZZ]
        """)
    c = cfg.announcement.circuit(0)
    assert c.n_single == 2 and c.n_two == 3 and len(c.gates) == 8


def test_unknown_observable_letter_names_token():
    text = MINIMAL.replace("observables: [Z]", "observables: [Q]")
    with pytest.raises(ConfigError, match=r"'Q'") as err:
        parse(text)
    assert (err.value.line, err.value.column) == (5, 19)
    assert str(err.value).startswith("test.yaml:5:19:")


def test_syntax_error_has_position():
    with pytest.raises(ConfigError, match="YAML syntax error") as err:
        parse("circuits: [\n  - qubits: 1\n")
    assert err.value.line is not None


@pytest.mark.parametrize("gate, message", [
    ("RW 0 t0", "unknown gate"),
    ("RY 0", "takes 1 qubit"),
    ("CZ 0", "takes 2 qubit"),
    ("RY x t0", "bad qubit index"),
    ("RY 0 theta", "bad parameter token"),
    ("RY 3 t0", "qubit"),
    ("RY 0 t1", "range"),
])
def test_gate_errors(gate, message):
    with pytest.raises(ConfigError, match=message) as err:
        parse(MINIMAL.replace("RY 0 t0", gate))
    assert err.value.line == 4


@pytest.mark.parametrize("text, message", [
    ("", "empty config"),
    ("- 1\n", "mapping"),
    ("colour: red\n" + MINIMAL, "colour"),
    ("iterations: 10\n", "circuits"),
    (MINIMAL + "mode: fast\n", "mode"),
    (MINIMAL + "p_loss: 1.0\n", "p_loss"),
    (MINIMAL + "iterations: 0\n", "iterations"),
    (MINIMAL + "iterations: 2.5\n", "iterations"),
    (MINIMAL + "optimizer: {learning_rate: -1}\n", "learning rate"),
    (MINIMAL + "optimizer: {initial_theta: [1, 2]}\n", "initial_theta"),
    (MINIMAL + "cost: [{observable: X, weight: 1}]\n", "not announced"),
    (MINIMAL + "cost: [{observable: Z, circuit: 3}]\n", "circuit 3"),
    (MINIMAL + "cost: [{observable: Z, weight: .nan}]\n", "weight must be a number"),
    (MINIMAL + "audit: {checkpoint: sometime}\n", "checkpoint"),
    (MINIMAL + "audit: {theta_pairs: [[[0.1]]]}\n", "two parameter lists"),
    (MINIMAL + "loss_sweep: {p_loss: [0.5, 1.5]}\n", "p_loss"),
    (MINIMAL + "sample: {theta: [1, 2]}\n", "sample theta"),
    (MINIMAL.replace("[Z]", "[ZZ]"), "length"),
    (MINIMAL.replace("parameters: 1", "parameters: 2"), "never used|used at least"),
])
def test_config_errors(text, message):
    with pytest.raises(ConfigError, match=message):
        parse(text)


def test_cost_weight_is_a_number():
    with pytest.raises(ConfigError, match="weight") as err:
        parse(MINIMAL + "cost: [{observable: Z, weight: heavy}]\n")
    assert err.value.line == 6


def test_mismatched_parameter_counts():
    text = MINIMAL + "  - {qubits: 1, parameters: 2, gates: [RX 0 t0, RZ 0 t1], observables: [Z]}\n"
    with pytest.raises(ConfigError, match="L"):
        parse(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.yaml")


def test_theta_pairs_and_empty_pairs():
    cfg = parse(MINIMAL + "audit: {theta_pairs: [[[0.1], [0.2]]]}\n")
    assert len(cfg.audit.theta_pairs) == 1
    assert parse(MINIMAL + "audit: {theta_pairs: []}\n").audit.theta_pairs == []


def test_scientific_notation_is_a_float():
    cfg = parse(MINIMAL + "optimizer: {step: 1e-5}\n")
    assert cfg.optimizer.step == 1e-5
