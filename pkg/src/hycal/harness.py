"""Benchmark harness: shot sampling, full incremental sessions, grid sweeps.

A session walks a task stream step by step: before each step the new
domain's zero-shot accuracy is measured from text anchors alone, the step
is ingested into the prototype store, and every seen domain's test split
is then re-evaluated over the full seen class space (cross-domain
confusion allowed). Sessions are deterministic under a fixed seed.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from .core import ClassRegistry, DomainTask, FusionMode, TaskStream, assemble_stream
from .dataio import Dataset
from .errors import ConfigError, DataError
from .inference import HybridConfig, Scorer, predict, score_candidates
from .metrics import SessionResult, pooled_accuracies, session_report
from .prototypes import PrototypeStore, RegularizationConfig, ingest_task


class SettingKind(str, Enum):
    BALANCED_IN_CLASS_DOMAIN = "balanced_in_class_domain"
    CROSS_SCALE_IMBALANCE = "cross_scale_imbalance"
    HIGH_SCALE_DOMAIN_IMBALANCE = "high_scale_domain_imbalance"
    FIXED_SHOT_FSCIL = "fixed_shot_fscil"


# Default per-domain training budgets. The published distributions are
# shown only as bar charts, so these profiles are approximate by design:
# comparable budgets for the balanced setting, a strongly skewed geometric
# ladder for the high-scale one.
DEFAULT_BALANCED_TOTAL = 240
DEFAULT_HIGH_SCALE_BASE_TOTAL = 480
DEFAULT_HIGH_SCALE_DECAY = 0.5
DEFAULT_CROSS_SCALE_RANGE = (5, 50)


def recommended_gate(kind: "SettingKind", shots: int | None = None) -> tuple[float, float]:
    """Published (alpha, beta) choices per evaluation setting.

    The fixed-shot setting uses (1, 0) at 5 shots (immediate gate
    activation under extreme scarcity) and (10, 5) otherwise.
    """
    if kind is SettingKind.BALANCED_IN_CLASS_DOMAIN:
        return (20.0, 5.0)
    if kind is SettingKind.CROSS_SCALE_IMBALANCE:
        return (60.0, 5.0)
    if kind is SettingKind.HIGH_SCALE_DOMAIN_IMBALANCE:
        return (10.0, 5.0)
    if shots is not None and shots <= 5:
        return (1.0, 0.0)
    return (10.0, 5.0)


@dataclass(frozen=True)
class SettingSpec:
    kind: SettingKind
    shot_params: Mapping[str, object] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        params = dict(self.shot_params)
        if self.kind is SettingKind.FIXED_SHOT_FSCIL:
            shots = int(params.get("shots", 5))
            if shots < 1:
                raise ConfigError(f"FSCIL shots must be >= 1, got {shots}")
            params["shots"] = shots
        elif self.kind is SettingKind.CROSS_SCALE_IMBALANCE:
            low = int(params.get("low", DEFAULT_CROSS_SCALE_RANGE[0]))
            high = int(params.get("high", DEFAULT_CROSS_SCALE_RANGE[1]))
            if low < 1 or high < low:
                raise ConfigError(f"invalid shot range [{low}, {high}]")
            params["low"], params["high"] = low, high
        elif self.kind is SettingKind.BALANCED_IN_CLASS_DOMAIN:
            if "totals" not in params:
                total = int(params.get("per_domain_total", DEFAULT_BALANCED_TOTAL))
                if total < 1:
                    raise ConfigError(f"per_domain_total must be >= 1, got {total}")
                params["per_domain_total"] = total
        elif self.kind is SettingKind.HIGH_SCALE_DOMAIN_IMBALANCE:
            if "totals" not in params:
                base = int(params.get("base_total", DEFAULT_HIGH_SCALE_BASE_TOTAL))
                decay = float(params.get("decay", DEFAULT_HIGH_SCALE_DECAY))
                if base < 1 or not 0.0 < decay <= 1.0:
                    raise ConfigError(
                        f"invalid high-scale profile base={base} decay={decay}"
                    )
                params["base_total"], params["decay"] = base, decay
        object.__setattr__(self, "shot_params", params)


@dataclass(frozen=True)
class SweepSpec:
    alpha_grid: tuple[float, ...] = (1.0, 10.0, 20.0, 40.0, 60.0, 80.0)
    beta_grid: tuple[float, ...] = (0.0, 5.0, 10.0)
    lambda_grid: tuple[float, ...] = (1e-4,)
    gamma_grid: tuple[float, ...] = (1.0,)
    scorers: tuple[Scorer, ...] = (Scorer.DYNAMIC_HYBRID,)

    def __post_init__(self) -> None:
        for name in ("alpha_grid", "beta_grid", "lambda_grid", "gamma_grid", "scorers"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"{name} must be non-empty")


def _per_class_shots(
    kind: SettingKind,
    params: Mapping[str, object],
    domain_position: int,
    domain_id: int,
    class_ids: Sequence[int],
    rng: np.random.Generator,
) -> dict[int, int]:
    n = len(class_ids)
    if kind is SettingKind.FIXED_SHOT_FSCIL:
        return {c: int(params["shots"]) for c in class_ids}
    if kind is SettingKind.CROSS_SCALE_IMBALANCE:
        low, high = int(params["low"]), int(params["high"])
        draws = rng.integers(low, high + 1, size=n)
        return {c: int(k) for c, k in zip(class_ids, draws)}
    totals = params.get("totals")
    if totals is not None:
        try:
            total = int(totals[domain_id])  # type: ignore[index]
        except (KeyError, TypeError):
            raise ConfigError(f"no total budget declared for domain {domain_id}") from None
    elif kind is SettingKind.BALANCED_IN_CLASS_DOMAIN:
        total = int(params["per_domain_total"])
    else:
        total = int(round(float(params["base_total"]) * float(params["decay"]) ** domain_position))
    k = max(1, int(round(total / n)))
    return {c: k for c in class_ids}


def sample_shots(dataset: Dataset, setting: SettingSpec) -> TaskStream:
    """Draw a task stream from a dataset pool under an imbalance setting.

    Sampling is deterministic given ``setting.seed``; domains are visited
    in ascending id order and classes ascending within each domain, so the
    drawn shots do not depend on any later stream permutation.
    """
    rng = np.random.default_rng(setting.seed)
    tasks: list[DomainTask] = []
    for position, domain_id in enumerate(dataset.domain_ids()):
        class_ids = dataset.registry.classes_in_domain(domain_id)
        shots = _per_class_shots(
            setting.kind, setting.shot_params, position, domain_id, class_ids, rng
        )
        train = []
        for class_id in class_ids:
            pool = dataset.train_pool(class_id)
            k = shots[class_id]
            if len(pool) < k:
                raise DataError(
                    f"class {class_id} has {len(pool)} train samples, "
                    f"but the setting requests {k}"
                )
            chosen = rng.choice(len(pool), size=k, replace=False)
            train.extend(pool[i] for i in sorted(chosen))
        tasks.append(
            DomainTask(
                domain_id=domain_id,
                class_ids=class_ids,
                shots=shots,
                train_samples=tuple(train),
                test_samples=dataset.test_split(domain_id),
            )
        )
    return assemble_stream(tasks, registry=dataset.registry)


@dataclass(frozen=True)
class PredictionRecord:
    step: int
    domain_id: int
    sample_index: int
    true_class_id: int
    predicted_class_id: int
    correct: int


PREDICTIONS_CSV_COLUMNS = (
    "step",
    "domain_id",
    "sample_index",
    "true_class_id",
    "predicted_class_id",
    "correct",
)


@dataclass(frozen=True, eq=False)
class SessionOutcome:
    config: HybridConfig
    result: SessionResult
    predictions: tuple[PredictionRecord, ...]
    candidate_counts: tuple[int, ...]  # classes in the store after each step
    final_store: PrototypeStore


def _zero_shot_accuracy(task: DomainTask, registry: ClassRegistry) -> float:
    """Accuracy on the task's test split from text anchors alone."""
    class_ids = np.asarray(task.class_ids, dtype=np.int64)
    order = np.argsort(class_ids)
    class_ids = class_ids[order]
    anchors = np.stack([registry.text_embedding(int(c)).values for c in class_ids])
    anchor_norms = np.linalg.norm(anchors, axis=1)
    visuals = np.stack([s.embedding.values for s in task.test_samples])
    labels = np.asarray([s.class_id for s in task.test_samples], dtype=np.int64)
    v_norms = np.linalg.norm(visuals, axis=1)
    if np.any(anchor_norms == 0.0) or np.any(v_norms == 0.0):
        raise DataError("zero-norm embedding encountered in zero-shot evaluation")
    sims = (visuals @ anchors.T) / np.outer(v_norms, anchor_norms)
    preds = class_ids[np.argmax(sims, axis=1)]
    return 100.0 * float(np.mean(preds == labels))


def run_session_multi(
    stream: TaskStream,
    configs: Sequence[HybridConfig],
    registry: ClassRegistry,
    reg: RegularizationConfig,
    fusion_mode: FusionMode = FusionMode.SUM,
    zero_shot: Sequence[float] | None = None,
    collect_predictions: bool = True,
) -> list[SessionOutcome]:
    """Run one incremental session, scoring every config in a single pass.

    The cosine and Mahalanobis cues are computed once per evaluation and
    re-blended per config, so each returned outcome is numerically
    identical to a standalone run with that config.
    """
    if len(stream) == 0:
        raise ConfigError("cannot run a session over an empty stream")
    t_total = len(stream)
    if zero_shot is not None:
        zero_shot = [float(z) for z in zero_shot]
        if len(zero_shot) != t_total:
            raise ConfigError(
                f"external zero-shot vector has {len(zero_shot)} entries "
                f"for {t_total} tasks"
            )
        if any(not 0.0 <= z <= 100.0 for z in zero_shot):
            raise ConfigError("zero-shot accuracies must lie in [0, 100]")
    n_cfg = len(configs)
    acc = [np.full((t_total, t_total), np.nan) for _ in range(n_cfg)]
    zs = np.full(t_total, np.nan)
    predictions: list[list[PredictionRecord]] = [[] for _ in range(n_cfg)]
    candidate_counts: list[int] = []
    test_visuals: list[np.ndarray] = []
    test_labels: list[np.ndarray] = []
    store = PrototypeStore()
    for t, task in enumerate(stream):
        if zero_shot is None:
            zs[t] = _zero_shot_accuracy(task, registry)
        else:
            zs[t] = zero_shot[t]
        store = ingest_task(store, task, registry, fusion_mode, reg)
        candidate_counts.append(len(store))
        test_visuals.append(np.stack([s.embedding.values for s in task.test_samples]))
        test_labels.append(np.asarray([s.class_id for s in task.test_samples], dtype=np.int64))
        for n in range(t + 1):
            scores = score_candidates(test_visuals[n], store, registry, fusion_mode)
            labels = test_labels[n]
            for i, cfg in enumerate(configs):
                preds = predict(scores, cfg)
                acc[i][t, n] = 100.0 * float(np.mean(preds == labels))
                if collect_predictions:
                    domain_id = stream.tasks[n].domain_id
                    predictions[i].extend(
                        PredictionRecord(
                            step=t + 1,
                            domain_id=domain_id,
                            sample_index=j,
                            true_class_id=int(labels[j]),
                            predicted_class_id=int(preds[j]),
                            correct=int(preds[j] == labels[j]),
                        )
                        for j in range(labels.shape[0])
                    )
    task_sizes = np.asarray([task.total_shots for task in stream], dtype=np.int64)
    test_sizes = np.asarray([len(task.test_samples) for task in stream], dtype=np.int64)
    outcomes = []
    for i, cfg in enumerate(configs):
        result = SessionResult(
            acc=acc[i], zero_shot=zs, task_sizes=task_sizes, test_sizes=test_sizes
        )
        outcomes.append(
            SessionOutcome(
                config=cfg,
                result=result,
                predictions=tuple(predictions[i]),
                candidate_counts=tuple(candidate_counts),
                final_store=store,
            )
        )
    return outcomes


def run_session(
    stream: TaskStream,
    cfg: HybridConfig,
    registry: ClassRegistry,
    reg: RegularizationConfig,
    fusion_mode: FusionMode = FusionMode.SUM,
    zero_shot: Sequence[float] | None = None,
    collect_predictions: bool = True,
) -> SessionOutcome:
    """Run one incremental session under a single scoring config."""
    return run_session_multi(
        stream, [cfg], registry, reg, fusion_mode, zero_shot, collect_predictions
    )[0]


def config_hash(payload: Mapping[str, object]) -> str:
    """Short stable hash of a config mapping (seed excluded by callers)."""
    canon = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def run_sweep(
    stream_factory: Callable[[int], TaskStream],
    registry: ClassRegistry,
    sweep: SweepSpec,
    seeds: Sequence[int],
    fusion_mode: FusionMode = FusionMode.SUM,
    setting_label: str = "unspecified",
    zero_shot: Sequence[float] | None = None,
) -> Iterator[dict[str, object]]:
    """Yield one metric row per (seed, lambda, gamma, alpha, beta, scorer).

    Rows stream out as soon as each session finishes. Configs sharing a
    (seed, lambda, gamma) cell reuse one session pass over the stream.
    """
    if len(seeds) == 0:
        raise ConfigError("sweep requires at least one seed")
    for seed in seeds:
        stream = stream_factory(int(seed))
        for lam in sweep.lambda_grid:
            for gamma in sweep.gamma_grid:
                reg = RegularizationConfig(lam=float(lam), gamma=float(gamma))
                configs = [
                    HybridConfig(alpha=float(a), beta=float(b), scorer=scorer)
                    for scorer in sweep.scorers
                    for a in sweep.alpha_grid
                    for b in sweep.beta_grid
                ]
                outcomes = run_session_multi(
                    stream,
                    configs,
                    registry,
                    reg,
                    fusion_mode,
                    zero_shot=zero_shot,
                    collect_predictions=False,
                )
                for outcome in outcomes:
                    cfg = outcome.config
                    payload = {
                        "setting": setting_label,
                        "scorer": cfg.scorer.value,
                        "alpha": cfg.alpha,
                        "beta": cfg.beta,
                        "lam": reg.lam,
                        "gamma": reg.gamma,
                        "fusion": fusion_mode.value,
                    }
                    row: dict[str, object] = {
                        "setting": setting_label,
                        "scorer": cfg.scorer.value,
                        "seed": int(seed),
                    }
                    row.update(session_report(outcome.result))
                    row.update(
                        {
                            "alpha": cfg.alpha,
                            "beta": cfg.beta,
                            "lam": reg.lam,
                            "gamma": reg.gamma,
                            "fusion": fusion_mode.value,
                            "config_hash": config_hash(payload),
                        }
                    )
                    yield row


def prototype_displacement(
    store: PrototypeStore,
    task: DomainTask,
    registry: ClassRegistry,
    fusion_mode: FusionMode,
) -> dict[int, float]:
    """Distance from each prototype mean to its test-cluster centroid.

    An auxiliary drift diagnostic: centroids are computed from the task's
    fused test samples, so a large value flags a prototype pulled away
    from where its class actually lives.
    """
    from .core import fuse_embedding

    out: dict[int, float] = {}
    for class_id in task.class_ids:
        text = registry.text_embedding(class_id)
        fused = np.stack(
            [
                fuse_embedding(s.embedding, text, fusion_mode).values
                for s in task.test_samples
                if s.class_id == class_id
            ]
        )
        centroid = fused.mean(axis=0)
        out[class_id] = float(
            np.linalg.norm(store.prototype(class_id).mu.values - centroid)
        )
    return out


def write_predictions_csv(
    predictions: Sequence[PredictionRecord], path: str | Path
) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PREDICTIONS_CSV_COLUMNS)
        for p in predictions:
            writer.writerow(
                (p.step, p.domain_id, p.sample_index, p.true_class_id,
                 p.predicted_class_id, p.correct)
            )


def write_curve_csv(outcome: SessionOutcome, stream: TaskStream, path: str | Path) -> None:
    """Per-step accuracy table for plotting: one row per (step, scope).

    Scope is either a domain id (that domain's test accuracy at the step)
    or ``seen`` (pooled accuracy over every test sample seen so far).
    """
    pooled = pooled_accuracies(outcome.result)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("step", "scope", "accuracy"))
        for t in range(outcome.result.n_steps):
            for n in range(t + 1):
                writer.writerow(
                    (t + 1, f"domain:{stream.tasks[n].domain_id}",
                     float(outcome.result.acc[t, n]))
                )
            writer.writerow((t + 1, "seen", float(pooled[t])))
