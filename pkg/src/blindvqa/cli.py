"""Batch experiment driver.

All randomness comes from ``numpy.random.default_rng(seed)``; commands that
need several independent streams take them from ``Generator.spawn`` in a
fixed order, so identical (config, seed) pairs give identical files.

Exit codes: 0 success, 1 audit or run failure, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import audit
from .adqc import PHOTONS_PER_ROTATION, ServerGate
from .config import ConfigError, ExperimentConfig, LossSweepSection, load_config
from .protocol import (
    LossModel,
    attempt_cap,
    photon_budget,
    run_circuit_instance,
    transcript_no_signaling_check,
)
from .vqa import run_vqa

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
THRESHOLD_P_LOSS = 0.01


class UsageError(Exception):
    pass


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _p_loss(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"p-loss must be a number, got {text!r}") from None
    if not 0 <= value < 1:
        raise argparse.ArgumentTypeError("p-loss must be in [0, 1)")
    return value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blindvqa", description="Blind variational quantum algorithm simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True, seeded=True):
        p.add_argument("--config", type=Path, required=config_required,
                       help="experiment config (YAML)")
        if seeded:
            p.add_argument("--seed", type=_seed, required=True, help="master seed (u64)")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")

    p = sub.add_parser("run-vqe", help="optimize the cost through the blind protocol")
    common(p)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exact", dest="mode", action="store_const", const="exact",
                      help="branch-averaged expectations (no shot noise)")
    mode.add_argument("--sampled", dest="mode", action="store_const", const="sampled",
                      help="finite repetitions with photon loss")
    p.add_argument("--shots", type=_positive, help="valid runs per setting (overrides config)")
    p.add_argument("--p-loss", type=_p_loss, help="photon loss probability (overrides config)")

    p = sub.add_parser("audit-blindness", help="exact server-view check over theta pairs")
    common(p)
    p.add_argument("--leaky-fixture", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("loss-sweep", help="photon-loss success rate over a grid")
    common(p, config_required=False)
    p.add_argument("--shots", type=_positive, help="trials per grid point")
    p.add_argument("--p-loss", type=_p_loss, help="sweep this single loss value")

    p = sub.add_parser("compile-plan", help="print the server / client schedule")
    common(p, seeded=False)

    p = sub.add_parser("sample", help="run the full protocol shot by shot, keep transcripts")
    common(p)
    p.add_argument("--shots", type=_positive, help="valid runs per setting")
    p.add_argument("--p-loss", type=_p_loss, help="photon loss probability")
    return parser


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def cmd_run_vqe(cfg: ExperimentConfig, args) -> int:
    if cfg.cost is None:
        raise UsageError("run-vqe needs a 'cost' section in the config")
    mode = args.mode or cfg.mode
    p_loss = cfg.p_loss if args.p_loss is None else args.p_loss
    ann = cfg.announcement
    if args.shots:
        ann = dataclasses.replace(ann, repetitions=(args.shots,) * ann.num_circuits)
    rng = np.random.default_rng(args.seed)
    trace = run_vqa(ann, cfg.cost, cfg.initial_theta, LossModel(p_loss), cfg.optimizer, rng,
                    exact=mode == "exact")
    trace.write_csv(args.out / "trace.csv")
    used = sorted({t.circuit_index for t in cfg.cost.terms})
    exact_energy = cfg.cost.ground_energy(used[0]) if len(used) == 1 else None
    summary = {
        "benchmark": cfg.benchmark,
        "mode": mode,
        "seed": args.seed,
        "p_loss": p_loss,
        "repetitions": list(ann.repetitions),
        "iterations": len(trace.rows),
        "final_theta": [float(t) for t in trace.rows[-1].theta] if trace.rows else None,
        "final_cost": float(trace.final_cost) if trace.rows else None,
        "exact_energy": exact_energy,
        "error": (float(trace.final_cost) - exact_energy
                  if exact_energy is not None and trace.rows else None),
        "attempts": trace.total_attempts,
        "valid_runs": sum(r.valid_runs for r in trace.rows),
        "photon_budget": [photon_budget(c) for c in ann.circuits],
        "aborted": trace.aborted,
    }
    _write_json(args.out / "summary.json", summary)
    print(f"final cost {summary['final_cost']!r} after {summary['iterations']} iterations"
          + (f" (exact {exact_energy!r})" if exact_energy is not None else ""))
    if trace.aborted:
        print(f"aborted: {trace.aborted}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _leak_outcomes(qubit: int, outcome: int) -> str:
    """Test fixture: the server undoes X^j as if it had been told j."""
    return "X" * outcome


def cmd_audit_blindness(cfg: ExperimentConfig, args) -> int:
    ann = cfg.announcement
    rng = np.random.default_rng(args.seed)
    pairs = cfg.audit.theta_pairs
    if pairs is None:
        pairs = [tuple(rng.uniform(-np.pi, np.pi, size=(2, ann.num_parameters)))
                 for _ in range(cfg.audit.random_pairs)]
    if not pairs:
        raise UsageError("audit-blindness needs at least one theta pair")
    too_big = [i for i, c in enumerate(ann.circuits) if c.num_qubits > audit.MAX_AUDIT_QUBITS]
    if too_big:
        raise UsageError(
            f"circuit(s) {too_big} exceed the exact audit limit of {audit.MAX_AUDIT_QUBITS} "
            "register qubits; use the 'sample' command for a statistical check instead")
    feedback = _leak_outcomes if args.leaky_fixture else None
    rows, failed = [], 0
    for ci in range(ann.num_circuits):
        for k, (ta, tb) in enumerate(pairs):
            rep = audit.blindness_report(ann, ci, ta, tb, cfg.audit.checkpoint, feedback,
                                         cfg.audit.threshold)
            failed += not rep.passed
            rows.append([ci, k, repr(rep.distance_to_mixed_a), repr(rep.distance_to_mixed_b),
                         repr(rep.distance_between), repr(rep.threshold), int(rep.passed)])
    _write_csv(args.out / "blindness.csv",
               ["circuit", "pair", "distance_mixed_a", "distance_mixed_b", "distance_between",
                "threshold", "passed"], rows)
    worst = max(max(float(r[2]), float(r[3]), float(r[4])) for r in rows)
    print(f"{len(rows) - failed}/{len(rows)} theta pairs blind; worst distance {worst:.3e}")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_loss_sweep(cfg: ExperimentConfig | None, args) -> int:
    sweep = cfg.loss_sweep if cfg else LossSweepSection(n_ph=[3, 12, 24])
    p_grid = [args.p_loss] if args.p_loss is not None else list(sweep.p_loss)
    if THRESHOLD_P_LOSS not in p_grid:
        p_grid.append(THRESHOLD_P_LOSS)
    n_grid = sweep.n_ph
    if n_grid is None:
        n_grid = sorted({photon_budget(c) for c in cfg.announcement.circuits})
    if not p_grid or not n_grid:
        raise UsageError("loss sweep grid is empty")
    trials = args.shots or sweep.trials
    if trials < 1000:
        raise UsageError("loss sweep needs at least 1000 trials per grid point")
    rngs = np.random.default_rng(args.seed).spawn(len(p_grid) * len(n_grid))
    rows = []
    for (p, n), r in zip(((p, n) for p in p_grid for n in n_grid), rngs):
        rep = audit.loss_statistics_for_budget(LossModel(p), n, trials, r)
        rows.append([repr(p), n, trials, repr(rep.predicted), repr(rep.empirical),
                     repr(rep.sigma), int(rep.within_3sigma)])
    _write_csv(args.out / "loss_sweep.csv",
               ["p_loss", "n_ph", "trials", "predicted", "empirical", "sigma", "within_3sigma"],
               rows)
    print(f"{len(rows)} grid points, {sum(r[-1] for r in rows)} within 3 sigma")
    return EXIT_OK


def format_plan(circuit) -> list[str]:
    lines = [f"{'server':<24}| client"]
    gates = circuit.param_gates
    for op in circuit.compile():
        if isinstance(op, ServerGate):
            lines.append(f"{op.name + ' ' + ' '.join(map(str, op.qubits)):<24}|")
            continue
        rot = op.rotation
        p = gates[op.gate_index].param
        angle = f"t{p}" if rot.scale == 1 else f"{rot.scale:+g}*t{p}"
        for k in range(1, PHOTONS_PER_ROTATION + 1):
            lines.append(f"{'ROUND ' + str(op.qubit):<24}| R{rot.axis}({angle}) on q{op.qubit}, "
                         f"round {k}/{PHOTONS_PER_ROTATION}")
    lines.append(f"N_ph = {photon_budget(circuit)}")
    return lines


def cmd_compile_plan(cfg: ExperimentConfig, args) -> int:
    for ci, circuit in enumerate(cfg.announcement.circuits):
        print(f"# circuit {ci}: {circuit.num_qubits} qubits, L = {circuit.num_parameters}")
        for line in format_plan(circuit):
            print(line)
    return EXIT_OK


def cmd_sample(cfg: ExperimentConfig, args) -> int:
    s = cfg.sample
    ann = cfg.announcement
    theta = s.theta if s.theta is not None else cfg.initial_theta
    loss = LossModel(s.p_loss if args.p_loss is None else args.p_loss)
    shots = args.shots or s.shots
    ci = s.circuit
    rng = np.random.default_rng(args.seed)
    observables = ann.observables[ci]
    sums = np.zeros(len(observables))
    counts = np.zeros(len(observables), dtype=int)
    attempts = 0
    ok = True
    run = 0
    cap = attempt_cap(shots, loss, photon_budget(ann.circuit(ci)))
    with open(args.out / "transcript.jsonl", "w") as fh:
        for setting, idx in enumerate(ann.settings(ci)):
            valid = tried = 0
            while valid < shots:
                if tried >= cap:
                    print(f"attempt cap {cap} reached in setting {setting} with {valid} valid runs",
                          file=sys.stderr)
                    return EXIT_FAIL
                res, transcript = run_circuit_instance(ann, ci, theta, loss, rng.spawn(1)[0],
                                                       setting=setting)
                ok &= transcript_no_signaling_check(transcript).passed
                for line in transcript.to_lines(run):
                    fh.write(line + "\n")
                run += 1
                attempts += 1
                tried += 1
                if res.valid:
                    valid += 1
                    sums[idx] += res.corrected_eigenvalues
                    counts[idx] += 1
    means = sums / np.maximum(counts, 1)
    _write_json(args.out / "sample.json", {
        "circuit": ci,
        "theta": [float(t) for t in theta],
        "p_loss": loss.p_loss,
        "attempts": attempts,
        "valid_runs_per_setting": shots,
        "estimates": {o.letters: float(m) for o, m in zip(observables, means)},
        "no_signaling": "pass" if ok else "fail",
    })
    for o, m in zip(observables, means):
        print(f"<{o.letters}> = {m:+.4f}")
    print(f"{attempts} runs, no-signaling check {'passed' if ok else 'FAILED'}")
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "run-vqe": cmd_run_vqe,
    "audit-blindness": cmd_audit_blindness,
    "loss-sweep": cmd_loss_sweep,
    "compile-plan": cmd_compile_plan,
    "sample": cmd_sample,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config) if args.config is not None else None
        if args.command != "compile-plan":
            try:
                args.out.mkdir(parents=True, exist_ok=True)
            except OSError as err:
                raise UsageError(f"cannot create output directory {args.out}: {err.strerror}")
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, UsageError) as err:
        print(f"blindvqa {args.command}: error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
