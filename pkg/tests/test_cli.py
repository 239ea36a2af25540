import csv
import json
from pathlib import Path

import numpy as np
import pytest

from blindvqa.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, format_plan, main
from blindvqa.config import parse_config

ISING = Path(__file__).resolve().parents[1] / "configs" / "ising.yaml"

SMALL = """\
benchmark: ising
iterations: 4
circuits:
  - qubits: 2
    parameters: 4
    gates: [RY 0 t0, RY 1 t1, CZ 0 1, RY 0 t2, RY 1 t3]
    observables: [ZZ, XI, IX]
    repetitions: 200
cost:
  - {observable: ZZ, weight: -1.0}
  - {observable: XI, weight: -0.5}
  - {observable: IX, weight: -0.5}
optimizer: {initial_theta: [1.2, -0.7, 0.4, 0.9]}
audit: {random_pairs: 3}
loss_sweep: {p_loss: [0.01], n_ph: [12], trials: 2000}
sample: {shots: 20, theta: [0.1, 0.2, 0.3, 0.4]}
"""


@pytest.fixture
def small(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(SMALL)
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_missing_seed_is_a_usage_error(small, tmp_path, capsys):
    assert main(["run-vqe", "--config", str(small), "--out", str(tmp_path / "o")]) == EXIT_USAGE
    assert "--seed" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


@pytest.mark.parametrize("seed", ["-1", "abc", str(2**64)])
def test_bad_seed(small, seed):
    assert main(["run-vqe", "--config", str(small), "--seed", seed]) == EXIT_USAGE


def test_unknown_command():
    assert main(["optimize"]) == EXIT_USAGE


def test_parse_error_reports_position(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(SMALL.replace("[ZZ, XI, IX]", "[ZZ, XQ, IX]"))
    code = main(["run-vqe", "--config", str(bad), "--seed", "1", "--out", str(tmp_path / "o")])
    err = capsys.readouterr().err
    assert code == EXIT_USAGE
    assert f"{bad}:7:" in err and "'XQ'" in err
    assert not (tmp_path / "o").exists()


def test_missing_config_file(tmp_path):
    assert main(["compile-plan", "--config", str(tmp_path / "none.yaml")]) == EXIT_USAGE


def test_run_vqe_exact_outputs(small, tmp_path):
    out = tmp_path / "o"
    assert main(["run-vqe", "--config", str(small), "--seed", "5", "--out", str(out),
                 "--exact"]) == EXIT_OK
    rows = read_csv(out / "trace.csv")
    assert [int(r["iteration"]) for r in rows] == [1, 2, 3, 4]
    assert float(rows[-1]["cost"]) < float(rows[0]["cost"])
    summary = json.loads((out / "summary.json").read_text())
    assert summary["mode"] == "exact" and summary["seed"] == 5
    assert summary["exact_energy"] == pytest.approx(-np.sqrt(2))
    assert summary["photon_budget"] == [12]
    assert summary["final_cost"] == float(rows[-1]["cost"])
    assert summary["aborted"] is None


def test_run_vqe_sampled_overrides(small, tmp_path):
    out = tmp_path / "o"
    assert main(["run-vqe", "--config", str(small), "--seed", "5", "--out", str(out),
                 "--sampled", "--shots", "100", "--p-loss", "0.02"]) == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["mode"] == "sampled" and summary["p_loss"] == 0.02
    assert summary["repetitions"] == [100]
    rows = read_csv(out / "trace.csv")
    assert all(int(r["attempts"]) >= int(r["valid_runs"]) > 0 for r in rows)
    assert summary["attempts"] == sum(int(r["attempts"]) for r in rows)


@pytest.mark.parametrize("flag", ["--p-loss=1.0", "--p-loss=-0.1", "--shots=0"])
def test_bad_mode_flags(small, flag):
    assert main(["run-vqe", "--config", str(small), "--seed", "1", "--sampled", flag]) == EXIT_USAGE


def test_run_vqe_is_deterministic(small, tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        main(["run-vqe", "--config", str(small), "--seed", "42", "--out", str(out), "--sampled"])
        outs.append((out / "trace.csv").read_bytes())
    assert outs[0] == outs[1]
    other = tmp_path / "o3"
    main(["run-vqe", "--config", str(small), "--seed", "43", "--out", str(other), "--sampled"])
    assert (other / "trace.csv").read_bytes() != outs[0]


def test_audit_default_config_passes(small, tmp_path):
    out = tmp_path / "o"
    assert main(["audit-blindness", "--config", str(small), "--seed", "7",
                 "--out", str(out)]) == EXIT_OK
    rows = read_csv(out / "blindness.csv")
    assert len(rows) == 3
    assert all(float(r["distance_between"]) <= 1e-10 and r["passed"] == "1" for r in rows)


def test_audit_leaky_fixture_fails(small, tmp_path):
    out = tmp_path / "o"
    assert main(["audit-blindness", "--config", str(small), "--seed", "7", "--out", str(out),
                 "--leaky-fixture"]) == EXIT_FAIL
    assert all(r["passed"] == "0" for r in read_csv(out / "blindness.csv"))


def test_audit_empty_pairs_is_usage_error(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(SMALL.replace("audit: {random_pairs: 3}", "audit: {theta_pairs: []}"))
    assert main(["audit-blindness", "--config", str(cfg), "--seed", "1",
                 "--out", str(tmp_path / "o")]) == EXIT_USAGE


def test_audit_refuses_large_registers(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("""\
circuits:
  - {qubits: 4, parameters: 1, gates: [RY 0 t0, RY 1 t0, RY 2 t0, RY 3 t0], observables: [ZZZZ]}
""")
    assert main(["audit-blindness", "--config", str(cfg), "--seed", "1",
                 "--out", str(tmp_path / "o")]) == EXIT_USAGE
    assert "sample" in capsys.readouterr().err


def test_loss_sweep_example_row(small, tmp_path):
    out = tmp_path / "o"
    assert main(["loss-sweep", "--config", str(small), "--seed", "3", "--out", str(out)]) == EXIT_OK
    rows = read_csv(out / "loss_sweep.csv")
    assert len(rows) == 1
    assert (float(rows[0]["p_loss"]), int(rows[0]["n_ph"])) == (0.01, 12)
    assert float(rows[0]["predicted"]) == pytest.approx(0.8864, abs=1e-4)
    assert rows[0]["within_3sigma"] == "1"


def test_loss_sweep_lossless_and_threshold_rows(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(SMALL.replace("loss_sweep: {p_loss: [0.01], n_ph: [12], trials: 2000}",
                                 "loss_sweep: {p_loss: [0.0], n_ph: [5, 300], trials: 2000}"))
    out = tmp_path / "o"
    assert main(["loss-sweep", "--config", str(cfg), "--seed", "3", "--out", str(out)]) == EXIT_OK
    rows = {(float(r["p_loss"]), int(r["n_ph"])): r for r in read_csv(out / "loss_sweep.csv")}
    # the 1% threshold row is always included
    assert set(rows) == {(0.0, 5), (0.0, 300), (0.01, 5), (0.01, 300)}
    assert float(rows[0.0, 5]["empirical"]) == 1.0 and float(rows[0.0, 300]["empirical"]) == 1.0
    assert float(rows[0.01, 300]["predicted"]) == pytest.approx(0.049, abs=1e-3)


def test_loss_sweep_without_config(tmp_path):
    out = tmp_path / "o"
    assert main(["loss-sweep", "--seed", "3", "--out", str(out), "--shots", "1000"]) == EXIT_OK
    rows = read_csv(out / "loss_sweep.csv")
    assert len(rows) == 9 and all(r["trials"] == "1000" for r in rows)
    assert main(["loss-sweep", "--seed", "3", "--out", str(out), "--shots", "10"]) == EXIT_USAGE


def test_compile_plan_budget_line(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("""\
circuits:
  - {qubits: 2, parameters: 2, gates: [H 0, RX 0 t0, CZ 0 1, RY 1 t1, CRZ 0 1 t0],
     observables: [ZZ]}
""")
    assert main(["compile-plan", "--config", str(cfg)]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[-1] == "N_ph = 12"
    assert sum(1 for ln in lines if ln.startswith("ROUND")) == 12
    assert any(ln.startswith("H 0") for ln in lines)


def test_compile_plan_empty_ansatz():
    cfg = parse_config("circuits:\n  - {qubits: 1, parameters: 0, observables: [Z]}\n")
    lines = format_plan(cfg.announcement.circuit(0))
    assert len(lines) == 2 and lines[-1] == "N_ph = 0"


def test_sample_writes_transcripts(small, tmp_path):
    out = tmp_path / "o"
    assert main(["sample", "--config", str(small), "--seed", "9", "--out", str(out),
                 "--p-loss", "0.05"]) == EXIT_OK
    summary = json.loads((out / "sample.json").read_text())
    assert summary["no_signaling"] == "pass"
    assert summary["valid_runs_per_setting"] == 20 and summary["attempts"] >= 40
    records = [json.loads(ln) for ln in (out / "transcript.jsonl").read_text().splitlines()]
    assert len({r["run"] for r in records}) == summary["attempts"]
    assert {r["direction"] for r in records} == {"server->client"}


def test_sample_attempt_cap(small, tmp_path, monkeypatch):
    import blindvqa.protocol as P
    monkeypatch.setattr(P, "MAX_ATTEMPT_FACTOR", 0.01)
    assert main(["sample", "--config", str(small), "--seed", "9", "--out", str(tmp_path / "o"),
                 "--p-loss", "0.3"]) == EXIT_FAIL


def test_module_entry_point(small, tmp_path):
    import subprocess
    import sys
    proc = subprocess.run([sys.executable, "-m", "blindvqa", "compile-plan", "--config", str(small)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "N_ph = 12" in proc.stdout
