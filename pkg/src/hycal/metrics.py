"""Session metrics: Average/Last accuracy, S_adapt, S_last, and S_CDE.

All accuracies are percentages in [0, 100]. The accuracy matrix records
A[t, n] = accuracy on the test split of the n-th task, measured after
step t, which is defined only for n <= t; undefined cells hold NaN.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, ProtocolError

METRICS_CSV_COLUMNS = (
    "setting",
    "scorer",
    "seed",
    "avg_acc",
    "last_acc",
    "s_adapt",
    "s_last",
    "s_cde",
)


@dataclass(frozen=True, eq=False)
class SessionResult:
    """Accuracy matrix, zero-shot vector, and per-task sizes for one run.

    ``test_sizes`` weights the pooled all-seen-classes accuracy; when it is
    omitted every task's test split counts equally.
    """

    acc: np.ndarray  # (T, T), row = step, col = task position, NaN above diagonal
    zero_shot: np.ndarray  # (T,)
    task_sizes: np.ndarray  # (T,) training samples per task (K^t)
    test_sizes: np.ndarray | None = None  # (T,) test samples per task

    def __post_init__(self) -> None:
        acc = np.array(self.acc, dtype=np.float64, copy=True)
        if acc.ndim != 2 or acc.shape[0] != acc.shape[1] or acc.shape[0] < 1:
            raise ConfigError(f"accuracy matrix must be square, got shape {acc.shape}")
        t = acc.shape[0]
        upper = np.triu_indices(t, k=1)
        if not np.all(np.isnan(acc[upper])):
            raise ConfigError("A[t, n] with n > t must be NaN (not yet defined)")
        defined = acc[~np.isnan(acc)]
        if np.any((defined < 0.0) | (defined > 100.0)):
            raise ConfigError("accuracies must lie in [0, 100]")
        zero_shot = np.array(self.zero_shot, dtype=np.float64, copy=True)
        if zero_shot.shape != (t,):
            raise ConfigError(f"zero_shot must have length {t}, got {zero_shot.shape}")
        zs = zero_shot[~np.isnan(zero_shot)]
        if np.any((zs < 0.0) | (zs > 100.0)):
            raise ConfigError("zero-shot accuracies must lie in [0, 100]")
        task_sizes = np.array(self.task_sizes, dtype=np.int64, copy=True)
        if task_sizes.shape != (t,) or np.any(task_sizes < 1):
            raise ConfigError("task_sizes must be positive integers, one per task")
        test_sizes = self.test_sizes
        if test_sizes is not None:
            test_sizes = np.array(test_sizes, dtype=np.int64, copy=True)
            if test_sizes.shape != (t,) or np.any(test_sizes < 1):
                raise ConfigError("test_sizes must be positive integers, one per task")
            test_sizes.setflags(write=False)
        for arr in (acc, zero_shot, task_sizes):
            arr.setflags(write=False)
        object.__setattr__(self, "acc", acc)
        object.__setattr__(self, "zero_shot", zero_shot)
        object.__setattr__(self, "task_sizes", task_sizes)
        object.__setattr__(self, "test_sizes", test_sizes)

    @property
    def n_steps(self) -> int:
        return int(self.acc.shape[0])


def task_weights(task_sizes: Sequence[int] | np.ndarray) -> np.ndarray:
    """Data-efficiency weights proportional to 1/sqrt(K^t), normalized to 1."""
    k = np.asarray(task_sizes, dtype=np.float64)
    if k.size == 0:
        raise ConfigError("task_weights requires at least one task")
    if np.any(k < 1):
        raise ConfigError("all task sizes must be >= 1")
    raw = 1.0 / np.sqrt(k)
    return raw / raw.sum()


def s_adapt(result: SessionResult) -> float:
    """Weighted mean over tasks of (zero-shot + immediate accuracy) / 2."""
    diag = np.diagonal(result.acc)
    if np.any(np.isnan(diag)):
        raise ProtocolError("diagonal accuracy A_t^t missing for some step")
    if np.any(np.isnan(result.zero_shot)):
        raise ProtocolError("zero-shot accuracy Z^t missing for some step")
    w = task_weights(result.task_sizes)
    return float(np.sum(w * (result.zero_shot + diag) / 2.0))


def s_last(result: SessionResult) -> float:
    """Weighted mean of per-task accuracies at the final step."""
    final = result.acc[-1, :]
    if np.any(np.isnan(final)):
        raise ProtocolError("final accuracy row is incomplete")
    w = task_weights(result.task_sizes)
    return float(np.sum(w * final))


def s_cde(adapt: float, last: float) -> float:
    """Harmonic mean of the adaptability and final-retention scores."""
    if adapt < 0.0 or last < 0.0:
        raise ConfigError(f"scores must be non-negative, got ({adapt}, {last})")
    denom = adapt + last
    if denom == 0.0:
        return 0.0
    return 2.0 * adapt * last / denom


def pooled_accuracies(result: SessionResult) -> np.ndarray:
    """Accuracy over all test samples of tasks 1..t, per step t."""
    t = result.n_steps
    if result.test_sizes is not None:
        sizes = result.test_sizes.astype(np.float64)
    else:
        sizes = np.ones(t)
    out = np.empty(t)
    for step in range(t):
        row = result.acc[step, : step + 1]
        if np.any(np.isnan(row)):
            raise ProtocolError(f"accuracy row for step {step + 1} is incomplete")
        w = sizes[: step + 1]
        out[step] = float(np.sum(row * w) / np.sum(w))
    return out


def average_acc(result: SessionResult) -> float:
    """Unweighted mean over steps of the all-seen-classes accuracy."""
    return float(np.mean(pooled_accuracies(result)))


def last_acc(result: SessionResult) -> float:
    """All-seen-classes accuracy after the final step."""
    return float(pooled_accuracies(result)[-1])


def per_task_average_acc(result: SessionResult) -> float:
    """Mean over steps of the unweighted per-task accuracy average.

    Companion reading of "mean accuracy across tasks": each step averages
    its per-task accuracies without pooling by test-set size.
    """
    t = result.n_steps
    vals = np.empty(t)
    for step in range(t):
        row = result.acc[step, : step + 1]
        if np.any(np.isnan(row)):
            raise ProtocolError(f"accuracy row for step {step + 1} is incomplete")
        vals[step] = float(np.mean(row))
    return float(np.mean(vals))


def session_report(result: SessionResult) -> dict[str, float]:
    """Flat metric report for one session."""
    adapt = s_adapt(result)
    last = s_last(result)
    return {
        "avg_acc": average_acc(result),
        "last_acc": last_acc(result),
        "s_adapt": adapt,
        "s_last": last,
        "s_cde": s_cde(adapt, last),
        "per_task_avg_acc": per_task_average_acc(result),
    }


def write_metrics_csv(rows: Sequence[Mapping[str, object]], path: str | Path) -> None:
    """Write metric rows with the canonical leading column order.

    Any extra keys (hyperparameters, config hash) follow the canonical
    columns in first-seen order.
    """
    extra: list[str] = []
    for row in rows:
        for key in row:
            if key not in METRICS_CSV_COLUMNS and key not in extra:
                extra.append(key)
    columns = list(METRICS_CSV_COLUMNS) + extra
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row.get(col, "") for col in columns])


def write_metrics_json(rows: Sequence[Mapping[str, object]], path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(list(rows), fh, indent=2, sort_keys=True)
        fh.write("\n")
