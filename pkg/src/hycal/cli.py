"""Command-line surface: synth, run, sweep, diagnose, report.

All randomness flows from explicit seeds, so every subcommand is fully
deterministic for a fixed config and input files. Exit codes: 0 on
success, 1 on validation or usage errors, 2 on I/O errors.

The JSON config schemas are documented in docs/config-schema.md.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import FusionMode, TaskStream, assemble_stream
from .dataio import Dataset, read_dataset, write_dataset, write_snapshot
from .diagnostics import (
    calibrate_independence_epsilon,
    independence_check,
    mi_gain_check,
)
from .errors import FileIOError, ValidationError
from .harness import (
    SettingKind,
    SettingSpec,
    SweepSpec,
    config_hash,
    run_session,
    run_sweep,
    sample_shots,
    write_curve_csv,
    write_predictions_csv,
)
from .inference import HybridConfig, Scorer
from .metrics import METRICS_CSV_COLUMNS, session_report, write_metrics_json
from .prototypes import RegularizationConfig
from .synthetic import SyntheticDomainSpec, generate_domains, geometric_spectrum
from .errors import ConfigError

SWEEP_CSV_COLUMNS = METRICS_CSV_COLUMNS + (
    "per_task_avg_acc",
    "alpha",
    "beta",
    "lam",
    "gamma",
    "fusion",
    "config_hash",
)

_GROUP_COLUMNS = ("setting", "scorer", "alpha", "beta", "lam", "gamma", "fusion")
_METRIC_COLUMNS = ("avg_acc", "last_acc", "s_adapt", "s_last", "s_cde")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # noqa: A003 - argparse hook
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def _parse_setting(cfg: Mapping[str, object], seed_override: int | None) -> SettingSpec:
    try:
        kind = SettingKind(str(cfg.get("kind", "fixed_shot_fscil")))
    except ValueError:
        raise ConfigError(f"unknown setting kind {cfg.get('kind')!r}") from None
    seed = int(cfg.get("seed", 0)) if seed_override is None else seed_override
    return SettingSpec(kind=kind, shot_params=dict(cfg.get("params", {})), seed=seed)


def _parse_fusion(cfg: Mapping[str, object]) -> FusionMode:
    try:
        return FusionMode(str(cfg.get("fusion", "sum")))
    except ValueError:
        raise ConfigError(f"unknown fusion mode {cfg.get('fusion')!r}") from None


def _parse_hybrid(cfg: Mapping[str, object]) -> HybridConfig:
    hy = dict(cfg.get("hybrid", {}))
    try:
        scorer = Scorer(str(hy.get("scorer", "dynamic_hybrid")))
    except ValueError:
        raise ConfigError(f"unknown scorer {hy.get('scorer')!r}") from None
    return HybridConfig(
        alpha=float(hy.get("alpha", 10.0)),
        beta=float(hy.get("beta", 5.0)),
        scorer=scorer,
    )


def _parse_reg(cfg: Mapping[str, object]) -> RegularizationConfig:
    reg = dict(cfg.get("regularization", {}))
    lam = reg.get("lam", reg.get("lambda", 1e-4))
    return RegularizationConfig(lam=float(lam), gamma=float(reg.get("gamma", 1.0)))


def _apply_order(stream: TaskStream, cfg: Mapping[str, object], registry) -> TaskStream:
    order_cfg = dict(cfg.get("order", {"mode": "default"}))
    mode = str(order_cfg.get("mode", "default"))
    if mode == "default":
        return stream
    if mode == "seed":
        rng = np.random.default_rng(int(order_cfg.get("seed", 0)))
        perm = [int(i) for i in rng.permutation(len(stream))]
    elif mode == "explicit":
        perm = [int(i) for i in order_cfg.get("permutation", [])]
    else:
        raise ConfigError(f"unknown order mode {mode!r}")
    return assemble_stream(list(stream.tasks), perm, registry=registry)


def _zero_shot_override(cfg: Mapping[str, object]) -> list[float] | None:
    zs = cfg.get("zero_shot")
    if zs is None:
        return None
    return [float(z) for z in zs]  # type: ignore[union-attr]


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = _load_json(args.spec)
    dim = int(spec.get("dim", 16))
    base_seed = int(spec.get("seed", 0)) if args.seed is None else args.seed
    domains_cfg = spec.get("domains")
    if not domains_cfg:
        raise ConfigError("synth spec must declare at least one domain")
    seeds = np.random.SeedSequence(base_seed).generate_state(
        len(domains_cfg), dtype=np.uint64
    )
    specs = []
    for i, dom in enumerate(domains_cfg):
        if "spectrum" in dom:
            spectrum = tuple(float(s) for s in dom["spectrum"])
        else:
            spectrum = geometric_spectrum(dim, float(dom.get("spectrum_span", 1.0)))
        train_count = dom.get("train_count", 30)
        if isinstance(train_count, list):
            train_count = tuple(int(k) for k in train_count)
        else:
            train_count = int(train_count)
        specs.append(
            SyntheticDomainSpec(
                domain_id=int(dom.get("domain_id", i)),
                n_classes=int(dom.get("n_classes", 4)),
                dim=dim,
                dispersion=float(dom.get("dispersion", 8.0)),
                scale=float(dom.get("scale", 1.0)),
                spectrum=spectrum,
                train_count=train_count,
                test_count=int(dom.get("test_count", 10)),
                text_noise=(
                    None if dom.get("text_noise") is None else float(dom["text_noise"])
                ),
                seed=int(dom["seed"]) if "seed" in dom else int(seeds[i]),
            )
        )
    stream, registry = generate_domains(specs)
    samples = [s for task in stream for s in list(task.train_samples) + list(task.test_samples)]
    write_dataset(args.out, Dataset(registry, samples))
    print(f"wrote {args.out}: {len(registry)} classes, {len(samples)} samples")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_json(args.config)
    dataset = read_dataset(str(cfg["dataset"]))
    setting = _parse_setting(dict(cfg.get("setting", {})), args.seed)
    stream = sample_shots(dataset, setting)
    stream = _apply_order(stream, cfg, dataset.registry)
    fusion = _parse_fusion(cfg)
    hybrid = _parse_hybrid(cfg)
    reg = _parse_reg(cfg)
    label = str(cfg.get("label", setting.kind.value))
    out_dir = Path(args.out or cfg.get("output_dir", "out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    outcome = run_session(
        stream,
        hybrid,
        dataset.registry,
        reg,
        fusion,
        zero_shot=_zero_shot_override(cfg),
    )
    payload = {
        "setting": label,
        "scorer": hybrid.scorer.value,
        "alpha": hybrid.alpha,
        "beta": hybrid.beta,
        "lam": reg.lam,
        "gamma": reg.gamma,
        "fusion": fusion.value,
    }
    row: dict[str, object] = {
        "setting": label,
        "scorer": hybrid.scorer.value,
        "seed": setting.seed,
    }
    row.update(session_report(outcome.result))
    row.update(
        {
            "alpha": hybrid.alpha,
            "beta": hybrid.beta,
            "lam": reg.lam,
            "gamma": reg.gamma,
            "fusion": fusion.value,
            "config_hash": config_hash(payload),
        }
    )
    _write_rows_csv([row], out_dir / "metrics.csv")
    write_metrics_json([row], out_dir / "metrics.json")
    write_predictions_csv(outcome.predictions, out_dir / "predictions.csv")
    write_curve_csv(outcome, stream, out_dir / "curve.csv")
    write_snapshot(out_dir / "prototypes.hyps", outcome.final_store)
    print(f"wrote metrics, predictions, curve, and snapshot under {out_dir}")
    return 0


def _write_rows_csv(rows: Sequence[Mapping[str, object]], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_CSV_COLUMNS)
        for row in rows:
            writer.writerow([row.get(col, "") for col in SWEEP_CSV_COLUMNS])


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load_json(args.config)
    dataset = read_dataset(str(cfg["dataset"]))
    setting = _parse_setting(dict(cfg.get("setting", {})), None)
    fusion = _parse_fusion(cfg)
    grids = dict(cfg.get("grids", {}))
    try:
        scorers = tuple(Scorer(str(s)) for s in cfg.get("scorers", ["dynamic_hybrid"]))
    except ValueError as exc:
        raise ConfigError(f"unknown scorer in sweep config: {exc}") from None
    sweep = SweepSpec(
        alpha_grid=tuple(float(a) for a in grids.get("alpha", SweepSpec.alpha_grid)),
        beta_grid=tuple(float(b) for b in grids.get("beta", SweepSpec.beta_grid)),
        lambda_grid=tuple(float(v) for v in grids.get("lambda", SweepSpec.lambda_grid)),
        gamma_grid=tuple(float(g) for g in grids.get("gamma", SweepSpec.gamma_grid)),
        scorers=scorers,
    )
    seeds = [int(s) for s in cfg.get("seeds", [0])]
    label = str(cfg.get("label", setting.kind.value))
    out_dir = Path(args.out or cfg.get("output_dir", "out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "sweep.csv"

    def stream_factory(seed: int) -> TaskStream:
        stream = sample_shots(dataset, replace(setting, seed=seed))
        return _apply_order(stream, cfg, dataset.registry)

    n_rows = 0
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_CSV_COLUMNS)
        for row in run_sweep(
            stream_factory,
            dataset.registry,
            sweep,
            seeds,
            fusion,
            setting_label=label,
            zero_shot=_zero_shot_override(cfg),
        ):
            writer.writerow([row.get(col, "") for col in SWEEP_CSV_COLUMNS])
            fh.flush()
            n_rows += 1
    print(f"wrote {n_rows} rows to {out_path}")
    return 0


def _cmd_diagnose(args: argparse.Namespace) -> int:
    if args.check == "independence":
        report = independence_check(args.d, args.sigma, args.n, args.seed, args.bins)
        epsilon = calibrate_independence_epsilon(args.n, report.n_bins, args.seed)
        out = dict(report.as_dict())
        out["epsilon"] = epsilon
        out["passed"] = bool(
            abs(report.pearson_corr) < 0.02 and report.binned_mi < epsilon
        )
    else:
        report = mi_gain_check(args.d, args.n, seed=args.seed, sigma=args.sigma,
                               n_bins=args.bins)
        out = dict(report.as_dict())
        out["passed"] = report.holds
    text = json.dumps(out, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    rows: list[dict[str, str]] = []
    for path in args.inputs:
        with open(path, newline="") as fh:
            rows.extend(csv.DictReader(fh))
    if not rows:
        raise ConfigError("no rows found in the input CSVs")
    groups: dict[tuple, list[dict[str, str]]] = {}
    for row in rows:
        key = tuple(row.get(col, "") for col in _GROUP_COLUMNS)
        groups.setdefault(key, []).append(row)
    header = list(_GROUP_COLUMNS) + ["n_runs"]
    for metric in _METRIC_COLUMNS:
        header += [f"{metric}_mean", f"{metric}_sd", f"{metric}_ci95"]
    out_rows = []
    for key in sorted(groups):
        members = groups[key]
        out_row: list[object] = list(key) + [len(members)]
        for metric in _METRIC_COLUMNS:
            vals = np.asarray([float(m[metric]) for m in members])
            mean = float(vals.mean())
            sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
            ci = 1.96 * sd / math.sqrt(vals.size)
            out_row += [mean, sd, ci]
        out_rows.append(out_row)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(out_rows)
        print(f"wrote {len(out_rows)} aggregated rows to {args.out}")
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(header)
        writer.writerows(out_rows)
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="hycal", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset file")
    p.add_argument("--spec", required=True, help="JSON generation spec")
    p.add_argument("--out", required=True, help="output .hyeb path")
    p.add_argument("--seed", type=int, default=None, help="override the base seed")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("run", help="run one incremental session")
    p.add_argument("--config", required=True, help="JSON run config")
    p.add_argument("--seed", type=int, default=None, help="override the sampling seed")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="run a hyperparameter grid sweep")
    p.add_argument("--config", required=True, help="JSON sweep config")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("diagnose", help="run a sampling diagnostic")
    p.add_argument("--check", required=True, choices=("independence", "mi-gain"))
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bins", type=int, default=None)
    p.add_argument("--out", default=None, help="write the JSON report here")
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("report", help="aggregate metric CSVs across seeds")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileIOError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()
