"""Command-line harness: training runs, sweeps, baselines, and verification.

Subcommands: ``train`` (policy + sensing optimization into a run directory),
``sweep`` (accuracy/SINR versus jam power for two trained models),
``baseline`` (three-method SINR comparison table), ``oracle`` (tiny-instance
brute-force validation of the policy-gradient optimizer), ``gradcheck``
(finite-difference verification of the network engine), ``plot`` (vector
figures from a metrics file), and ``verify`` (run-directory integrity).

Every CSV is byte-deterministic given (config, seed, code version); wall-time
columns are zeroed unless ``--wall-clock`` is passed, since elapsed times are
the one non-reproducible quantity.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .agents import (
    EpochRecord,
    TrainRunConfig,
    load_model,
    save_model,
    train,
)
from .baselines import (
    SINR_METHODS,
    SinrTable,
    oracle_suite,
    proposed_sinr,
    zero_forcing_sinr,
)
from .errors import MetasenseError
from .losses import accuracy as accuracy_of
from .losses import cross_entropy
from .mdp_env import evaluate_measurements, rollout
from .neuralnet import forward, gradient_check, init_dense_net
from .scene import (
    ExperimentConfig,
    load_config_file,
    sample_scenarios,
    validate_config,
)

METRICS_HEADER = "epoch,ce_loss,combined_loss,mean_sinr_db,accuracy,wall_ms"
SWEEP_HEADER = "jam_power_mw,model,accuracy,mean_sinr_db"


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v != ""]


def _parse_ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v != ""]


def _load_cfg(args) -> ExperimentConfig:
    cfg = (
        load_config_file(args.config)
        if getattr(args, "config", None)
        else ExperimentConfig()
    )
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    validate_config(cfg)
    return cfg


# ---------------------------------------------------------------------------
# Metrics CSV
# ---------------------------------------------------------------------------

def write_metrics_csv(
    path: str | Path, records: list[EpochRecord], wall_clock: bool = False
) -> None:
    """Emit the per-epoch metrics table with exact round-trip floats."""
    lines = [METRICS_HEADER]
    for r in records:
        wall = r.wall_ms if wall_clock else 0
        lines.append(
            f"{r.epoch},{float(r.ce_loss)!r},{float(r.combined_loss)!r},"
            f"{float(r.mean_sinr_db)!r},{float(r.accuracy)!r},{wall}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_metrics_csv(path: str | Path) -> list[EpochRecord]:
    lines = [ln for ln in Path(path).read_text().split("\n") if ln]
    if not lines or lines[0] != METRICS_HEADER:
        raise ValueError(f"{path} is not a metrics CSV")
    records = []
    for ln in lines[1:]:
        epoch, ce, comb, sinr_db, acc, wall = ln.split(",")
        records.append(
            EpochRecord(
                epoch=int(epoch),
                ce_loss=float(ce),
                combined_loss=float(comb),
                mean_sinr_db=float(sinr_db),
                accuracy=float(acc),
                wall_ms=int(wall),
            )
        )
    return records


# ---------------------------------------------------------------------------
# Run manifest
# ---------------------------------------------------------------------------

def file_sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(
    out_dir: Path,
    cfg: ExperimentConfig,
    mode: str,
    started_utc: str,
    finished_utc: str,
) -> None:
    """Record the run's effective config and an inventory of every emitted file."""
    files = sorted(
        p
        for p in out_dir.rglob("*")
        if p.is_file() and p.relative_to(out_dir) != Path("manifest.json")
    )
    inventory = [
        {
            "path": str(p.relative_to(out_dir)),
            "sha256": file_sha256(p),
            "bytes": p.stat().st_size,
        }
        for p in files
    ]
    doc = {
        "kind": "metasense.manifest",
        "code_version": __version__,
        "seed": cfg.seed,
        "mode": mode,
        "started_utc": started_utc,
        "finished_utc": finished_utc,
        "config": cfg.to_dict(),
        "files": inventory,
    }
    (out_dir / "manifest.json").write_text(json.dumps(doc, indent=2) + "\n")


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    run_cfg = TrainRunConfig(
        mode=args.mode,
        epochs=args.epochs,
        subset_size=args.subset_size,
        n_mc=args.n_mc,
        jam_power_mw=args.jam_power,
        baseline_enabled=not args.no_baseline,
        eval_every=args.eval_every,
        fixed_reward_seed=args.fixed_reward_seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    started = _utcnow()
    report = train(
        cfg,
        run_cfg,
        checkpoint_dir=out / "checkpoints",
        progress_every=args.progress_every,
    )
    write_metrics_csv(out / "metrics.csv", report.records, args.wall_clock)
    save_model(out / "model_final.json", report.policy, report.sensing, cfg, args.mode)
    (out / "control_final.json").write_text(
        json.dumps(report.greedy_control.to_document()) + "\n"
    )
    write_manifest(out, cfg, args.mode, started, _utcnow())
    print(f"run complete: {out} ({len(report.records)} epochs, mode {args.mode})")
    return 0


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    jam_power_mw: float
    model: str
    accuracy: float
    mean_sinr_db: float


def sweep_table(
    checkpoints: dict[str, str | Path],
    jam_powers_mw: list[float],
    n_trials: int,
    seed: int,
) -> list[SweepRow]:
    """Evaluate trained models across jam powers with a fixed evaluation seed.

    Each model is frozen to its greedy control sequence; every (model, power)
    cell reuses identical scenario, jammer-position, and noise draws, so the
    cells are exactly paired.
    """
    rows = []
    for label, path in checkpoints.items():
        policy, sensing, cfg, _mode, env = load_model(path)
        ctrl = rollout(policy, cfg, np.random.default_rng(0), greedy=True).terminal_control
        scenarios = sample_scenarios(cfg, np.random.default_rng(seed), count=n_trials)
        for power in jam_powers_mw:
            measurements = evaluate_measurements(
                ctrl,
                scenarios,
                env,
                np.random.default_rng(seed + 1),
                n_mc=1,
                jam_power_mw=float(power),
            )
            probs, _ = forward(sensing, measurements.features)
            rows.append(
                SweepRow(
                    jam_power_mw=float(power),
                    model=label,
                    accuracy=accuracy_of(probs, measurements.labels),
                    mean_sinr_db=float(
                        10.0 * np.log10(max(measurements.sinr.mean(), 1e-300))
                    ),
                )
            )
    return rows


def sweep_csv(rows: list[SweepRow]) -> str:
    lines = [SWEEP_HEADER]
    for r in rows:
        lines.append(
            f"{float(r.jam_power_mw)!r},{r.model},"
            f"{float(r.accuracy)!r},{float(r.mean_sinr_db)!r}"
        )
    return "\n".join(lines) + "\n"


def cmd_sweep(args) -> int:
    if len(args.checkpoint) != 2:
        print(
            "error: sweep needs exactly two --checkpoint flags "
            "(plain model first, anti-jam model second)",
            file=sys.stderr,
        )
        return 2
    powers = _parse_floats(args.jam_powers)
    checkpoints = {"plain": args.checkpoint[0], "antijam": args.checkpoint[1]}
    rows = sweep_table(checkpoints, powers, args.trials, args.seed)
    Path(args.out).write_text(sweep_csv(rows))

    plain = [r.accuracy for r in rows if r.model == "plain"]
    monotone = all(a >= b for a, b in zip(plain, plain[1:]))
    print(f"wrote {args.out} ({len(rows)} rows)")
    print(
        "plain-model accuracy monotone non-increasing in jam power: "
        + ("yes" if monotone else "no")
    )
    return 0


# ---------------------------------------------------------------------------
# baseline
# ---------------------------------------------------------------------------

def cmd_baseline(args) -> int:
    methods = [m for m in args.methods.split(",") if m]
    unknown = [m for m in methods if m not in SINR_METHODS]
    if unknown:
        print(
            f"error: unknown method(s) {unknown}; choose from {list(SINR_METHODS)}",
            file=sys.stderr,
        )
        return 2
    if "proposed" in methods and not args.checkpoint:
        print(
            "error: the 'proposed' method needs --checkpoint with a trained model",
            file=sys.stderr,
        )
        return 2

    powers = _parse_floats(args.jam_powers)
    rows = []
    if args.checkpoint:
        policy, _sensing, cfg, _mode, env = load_model(args.checkpoint)
    else:
        cfg, env = _load_cfg(args), None

    conventional = [m for m in methods if m != "proposed"]
    if conventional:
        rows += [
            r
            for r in zero_forcing_sinr(cfg, powers, args.trials, args.seed)
            if r.method in conventional
        ]
    if "proposed" in methods:
        ctrl = rollout(
            policy, cfg, np.random.default_rng(0), greedy=True
        ).terminal_control
        rows += proposed_sinr(ctrl, env, powers, args.trials, args.seed)

    table = SinrTable(rows)
    table.save(args.out)
    print(f"wrote {args.out} ({len(rows)} rows, {args.trials} trials per cell)")
    for row in rows:
        print(
            f"  {row.method:>12s} @ {row.jam_power_mw:g} mW: "
            f"{row.mean_sinr_db:.2f} dB"
        )
    return 0


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------

def cmd_oracle(args) -> int:
    if args.checkpoint:
        load_model(args.checkpoint)  # corrupt files abort with a checkpoint error
        print(f"checkpoint ok: {args.checkpoint}")
    seeds = _parse_ints(args.seeds)
    results = oracle_suite(
        seeds,
        max_epochs=args.max_epochs,
        check_every=args.check_every,
        target=args.target,
        pretrain_epochs=args.pretrain_epochs,
    )
    for r in results:
        print(
            f"seed {r.seed}: score {r.score:.4f} after {r.epochs_used} epochs "
            f"(policy {r.policy_reward:.6f}, optimum {r.best_reward:.6f}, "
            f"uniform mean {r.uniform_mean_reward:.6f}) "
            + ("PASS" if r.score >= args.target else "FAIL")
        )
    n_pass = sum(r.score >= args.target for r in results)
    needed = max(1, int(np.ceil(0.8 * len(results))))
    print(
        f"tolerances: score >= {args.target} of enumerated optimum within "
        f"{args.max_epochs} epochs; suite passes with {needed}/{len(results)} seeds"
    )
    print(f"result: {n_pass}/{len(results)} seeds passed")
    if args.out:
        Path(args.out).write_text(
            json.dumps(
                {
                    "target": args.target,
                    "max_epochs": args.max_epochs,
                    "results": [
                        {
                            "seed": r.seed,
                            "score": r.score,
                            "epochs_used": r.epochs_used,
                            "policy_reward": r.policy_reward,
                            "best_reward": r.best_reward,
                            "uniform_mean_reward": r.uniform_mean_reward,
                        }
                        for r in results
                    ],
                },
                indent=2,
            )
            + "\n"
        )
    return 0 if n_pass >= needed else 1


# ---------------------------------------------------------------------------
# gradcheck
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GradCheckResult:
    name: str
    dims: tuple[int, ...]
    activations: tuple[str, ...]
    max_rel_err: float


def exact_model_shapes(cfg: ExperimentConfig) -> list[tuple[str, list, list]]:
    """The (dims, activations) of the production sensing and policy networks."""
    net = cfg.network
    sensing = (
        "sensing",
        [2 * cfg.n_cells, *net.sensing_hidden, cfg.n_cells],
        ["relu"] * len(net.sensing_hidden) + ["sigmoid"],
    )
    feature = (
        "policy-feature",
        [cfg.n_rf * cfg.n_cells, *net.feature_hidden, net.feature_dim],
        ["relu"] * len(net.feature_hidden) + ["identity"],
    )
    head_in = (
        cfg.n_frames + cfg.n_elements + cfg.n_rf + 2 * cfg.n_frames * net.feature_dim
    )
    head = (
        "policy-head",
        [head_in, *net.policy_hidden, cfg.n_states],
        ["relu"] * len(net.policy_hidden) + ["softmax"],
    )
    return [sensing, feature, head]


def gradcheck_suite(
    cfg: ExperimentConfig, seed: int, n_archs: int = 20, step: float = 1e-5
) -> list[GradCheckResult]:
    """Finite-difference checks over random architectures plus the exact shapes."""
    rng = np.random.default_rng(seed)
    specs = exact_model_shapes(cfg)
    while len(specs) < n_archs:
        n_layers = int(rng.integers(2, 5))
        dims = [int(rng.integers(2, 49)) for _ in range(n_layers + 1)]
        acts = [
            str(rng.choice(["relu", "sigmoid", "identity"]))
            for _ in range(n_layers - 1)
        ]
        final = str(rng.choice(["identity", "sigmoid", "softmax"]))
        if final == "softmax" and dims[-1] < 2:
            final = "sigmoid"
        acts.append(final)
        specs.append((f"random-{len(specs)}", dims, acts))

    results = []
    for name, dims, acts in specs[:n_archs]:
        net = init_dense_net(dims, acts, rng)
        err = gradient_check(net, rng, step=step)
        results.append(
            GradCheckResult(
                name=name,
                dims=tuple(dims),
                activations=tuple(acts),
                max_rel_err=err,
            )
        )
    return results


def cmd_gradcheck(args) -> int:
    cfg = _load_cfg(args)
    results = gradcheck_suite(cfg, args.seed, args.n_archs, args.step)
    ok = True
    for r in results:
        status = "PASS" if r.max_rel_err < args.tol else "FAIL"
        ok = ok and r.max_rel_err < args.tol
        dims = "x".join(str(d) for d in r.dims)
        print(
            f"{r.name:>16s} [{dims}] max_rel_err={r.max_rel_err:.3e} "
            f"tol={args.tol:g} step={args.step:g} {status}"
        )
    print(f"result: {'all pass' if ok else 'FAILURES PRESENT'} ({len(results)} nets)")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# plot
# ---------------------------------------------------------------------------

def cmd_plot(args) -> int:
    records = read_metrics_csv(args.metrics)
    if not records:
        print("error: metrics file has no rows to plot", file=sys.stderr)
        return 2
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    epochs = [r.epoch for r in records]
    panels = [
        ("ce_loss", [r.ce_loss for r in records], "cross-entropy loss"),
        ("combined_loss", [r.combined_loss for r in records], "combined loss"),
        ("accuracy", [r.accuracy for r in records], "cell accuracy"),
        ("mean_sinr_db", [r.mean_sinr_db for r in records], "mean SINR (dB)"),
    ]
    fig, axes = plt.subplots(2, 2, figsize=(10.0, 7.0))
    for ax, (key, series, label) in zip(axes.ravel(), panels):
        ax.plot(epochs, series, linewidth=1.0)
        ax.set_xlabel("epoch")
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.out)
    plt.close(fig)
    print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def cmd_verify(args) -> int:
    run = Path(args.run)
    manifest_path = run / "manifest.json"
    if not manifest_path.is_file():
        print(f"error: no manifest.json in {run}", file=sys.stderr)
        return 2
    doc = json.loads(manifest_path.read_text())
    problems = []
    try:
        from .scene import load_config

        snapshot = load_config(json.dumps(doc["config"]))
        validate_config(snapshot)
    except (KeyError, MetasenseError) as exc:
        problems.append(f"config snapshot invalid: {exc}")
    for entry in doc.get("files", []):
        path = run / entry["path"]
        if not path.is_file():
            problems.append(f"missing file: {entry['path']}")
        elif file_sha256(path) != entry["sha256"]:
            problems.append(f"checksum mismatch: {entry['path']}")
    if problems:
        for p in problems:
            print(f"verify: {p}", file=sys.stderr)
        return 1
    print(f"ok: {len(doc.get('files', []))} files verified in {run}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metasense",
        description=(
            "Distributed metasurface RF-sensing simulator: train phase-control "
            "policies and occupancy decoders, compare anti-jamming receivers, "
            "and verify the numerical engines."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run policy + sensing training")
    p.add_argument("--config", help="YAML or JSON experiment config")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", required=True, help="run directory to create")
    p.add_argument("--mode", choices=("p1", "p2"), default="p1",
                   help="reward: p1 = detection only, p2 = detection + SINR")
    p.add_argument("--epochs", type=int, default=1500)
    p.add_argument("--subset-size", type=int, default=None)
    p.add_argument("--n-mc", type=int, default=None)
    p.add_argument("--jam-power", type=float, default=None,
                   help="jamming power (mW) during training; default 0 for p1, "
                        "config value for p2")
    p.add_argument("--eval-every", type=int, default=500,
                   help="checkpoint cadence in epochs")
    p.add_argument("--no-baseline", action="store_true",
                   help="disable the running-mean reward baseline")
    p.add_argument("--fixed-reward-seed", type=int, default=None,
                   help="freeze the reward Monte Carlo draws (oracle protocol)")
    p.add_argument("--wall-clock", action="store_true",
                   help="record real wall times (breaks byte determinism)")
    p.add_argument("--progress-every", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="accuracy/SINR vs jam power for two models")
    p.add_argument("--checkpoint", action="append", required=True,
                   help="model file; give twice: plain first, anti-jam second")
    p.add_argument("--jam-powers", default="0,100,200,300")
    p.add_argument("--trials", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("baseline", help="three-method SINR comparison table")
    p.add_argument("--config", help="config for the conventional receiver")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoint", help="trained model for the proposed method")
    p.add_argument("--methods", default="none,zero_forcing,proposed")
    p.add_argument("--jam-powers", default="100,200,300")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("oracle", help="tiny-instance brute-force validation")
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--max-epochs", type=int, default=2000)
    p.add_argument("--check-every", type=int, default=25)
    p.add_argument("--target", type=float, default=0.95)
    p.add_argument("--pretrain-epochs", type=int, default=300)
    p.add_argument("--checkpoint", help="validate a model file first")
    p.add_argument("--out", help="optional JSON report path")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--config", help="config whose exact network shapes to include")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-archs", type=int, default=20)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("plot", help="render metrics.csv to a vector figure")
    p.add_argument("--metrics", required=True, help="metrics CSV path")
    p.add_argument("--out", required=True, help="output figure path (.svg)")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("verify", help="check a run directory against its manifest")
    p.add_argument("--run", required=True, help="run directory")
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MetasenseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
