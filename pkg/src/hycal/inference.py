"""Hybrid-distance classification over a frozen prototype store.

For every candidate class the query is fused with that class's text
embedding, scored by cosine similarity to the prototype mean and by the
squared Mahalanobis distance under the prototype precision, and the two
cues are blended with a per-class sigmoid weight driven by the class's
training sample count. Single-cue and fixed-average scorers are provided
as ablation baselines.

Everything here is pure with respect to a frozen store and registry, so
queries may be scored from any number of threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import expit

from .core import ClassRegistry, EmbeddingVector, FusedEmbedding, FusionMode
from .errors import ConfigError, DimensionError, ProtocolError, ZeroVectorError
from .prototypes import ClassPrototype, PrototypeStore


class Scorer(str, Enum):
    DYNAMIC_HYBRID = "dynamic_hybrid"
    COSINE_ONLY = "cosine_only"
    MAHALANOBIS_ONLY = "mahalanobis_only"
    FIXED_AVERAGE = "fixed_average"


class MahaNormalization(str, Enum):
    PER_QUERY_MIN_MAX = "per_query_min_max"


@dataclass(frozen=True)
class HybridConfig:
    """Gate threshold alpha, gate smoothness beta, and scorer selection."""

    alpha: float = 10.0
    beta: float = 5.0
    maha_normalization: MahaNormalization = MahaNormalization.PER_QUERY_MIN_MAX
    scorer: Scorer = Scorer.DYNAMIC_HYBRID

    def __post_init__(self) -> None:
        if not np.isfinite(self.alpha):
            raise ConfigError(f"alpha must be finite, got {self.alpha}")
        if not (np.isfinite(self.beta) and self.beta >= 0.0):
            raise ConfigError(f"beta must be finite and >= 0, got {self.beta}")


@dataclass(frozen=True)
class ScoreEntry:
    class_id: int
    cosine: float
    maha_raw: float
    maha_normalized: float
    weight: float
    score: float

    def __post_init__(self) -> None:
        if not -1.0 <= self.cosine <= 1.0:
            raise ConfigError(f"cosine {self.cosine} outside [-1, 1]")
        if self.maha_raw < 0.0:
            raise ConfigError(f"maha_raw {self.maha_raw} negative")
        if not 0.0 <= self.maha_normalized <= 1.0:
            raise ConfigError(f"maha_normalized {self.maha_normalized} outside [0, 1]")
        if not 0.0 <= self.weight <= 1.0:
            raise ConfigError(f"weight {self.weight} outside [0, 1]")


@dataclass(frozen=True)
class ScoreBreakdown:
    """Per-class scoring record for one query, in ascending class-id order."""

    entries: tuple[ScoreEntry, ...]

    def csv_rows(self, query_id: int | str) -> list[tuple]:
        """Rows in the fixed debug-export column order.

        Columns: query_id, class_id, cosine, maha_raw, maha_norm, weight, score.
        """
        return [
            (query_id, e.class_id, e.cosine, e.maha_raw, e.maha_normalized, e.weight, e.score)
            for e in self.entries
        ]


BREAKDOWN_CSV_COLUMNS = (
    "query_id",
    "class_id",
    "cosine",
    "maha_raw",
    "maha_norm",
    "weight",
    "score",
)


def mahalanobis_sq(z: FusedEmbedding, proto: ClassPrototype) -> float:
    """Squared Mahalanobis distance (z - mu)^T P (z - mu), un-rooted."""
    if z.d_fused != proto.d_fused:
        raise DimensionError(
            f"query dimension {z.d_fused} != prototype dimension {proto.d_fused}"
        )
    diff = z.values - proto.mu.values
    # PD precision makes the form non-negative; clamp float dust at z == mu.
    return max(0.0, float(diff @ proto.precision @ diff))


def cosine_sim(z: FusedEmbedding, mu: FusedEmbedding) -> float:
    """Cosine similarity, clamped to [-1, 1] against rounding."""
    if z.d_fused != mu.d_fused:
        raise DimensionError(
            f"query dimension {z.d_fused} != prototype dimension {mu.d_fused}"
        )
    zn = float(np.linalg.norm(z.values))
    mn = float(np.linalg.norm(mu.values))
    if zn == 0.0 or mn == 0.0:
        raise ZeroVectorError("cosine similarity is undefined for a zero vector")
    return float(np.clip(float(z.values @ mu.values) / (zn * mn), -1.0, 1.0))


def dynamic_weight(k_c: int, alpha: float, beta: float) -> float:
    """Sigmoid gate 1/(1 + exp(-(K_c - alpha)/beta)).

    At beta == 0 the pointwise step limit applies: 0 below alpha, 0.5 at
    alpha, 1 above it.
    """
    if k_c < 1:
        raise ConfigError(f"K_c must be >= 1, got {k_c}")
    if beta < 0.0:
        raise ConfigError(f"beta must be >= 0, got {beta}")
    if beta == 0.0:
        if k_c < alpha:
            return 0.0
        if k_c > alpha:
            return 1.0
        return 0.5
    return float(expit((k_c - alpha) / beta))


def _weights(sample_counts: np.ndarray, cfg: HybridConfig) -> np.ndarray:
    if cfg.scorer is Scorer.COSINE_ONLY:
        return np.zeros_like(sample_counts, dtype=np.float64)
    if cfg.scorer is Scorer.MAHALANOBIS_ONLY:
        return np.ones_like(sample_counts, dtype=np.float64)
    if cfg.scorer is Scorer.FIXED_AVERAGE:
        return np.full(sample_counts.shape, 0.5)
    if cfg.beta == 0.0:
        return np.where(
            sample_counts < cfg.alpha,
            0.0,
            np.where(sample_counts > cfg.alpha, 1.0, 0.5),
        )
    return expit((sample_counts - cfg.alpha) / cfg.beta)


@dataclass(frozen=True, eq=False)
class CandidateScores:
    """Raw per-query, per-class cues shared by every scorer variant."""

    class_ids: np.ndarray  # (C,) ascending
    sample_counts: np.ndarray  # (C,)
    cosine: np.ndarray  # (n, C)
    maha_raw: np.ndarray  # (n, C)

    @property
    def n_queries(self) -> int:
        return int(self.cosine.shape[0])


def normalize_distances(maha_raw: np.ndarray) -> np.ndarray:
    """Per-query min-max rescaling of distances onto [0, 1].

    When all candidate distances are equal the normalized distance is
    defined as 0 for every candidate, collapsing the Mahalanobis cue to a
    constant.
    """
    dmin = maha_raw.min(axis=1, keepdims=True)
    dmax = maha_raw.max(axis=1, keepdims=True)
    span = dmax - dmin
    out = np.zeros_like(maha_raw)
    np.divide(maha_raw - dmin, span, out=out, where=span > 0.0)
    return out


def score_candidates(
    visuals: np.ndarray,
    store: PrototypeStore,
    registry: ClassRegistry,
    fusion_mode: FusionMode,
) -> CandidateScores:
    """Compute cosine and raw Mahalanobis cues for a batch of queries.

    ``visuals`` is an (n, d) float64 matrix of raw visual embeddings; each
    query is fused with every candidate class's text embedding before
    scoring, so the effective query differs per class.
    """
    if len(store) == 0:
        raise ProtocolError("cannot classify against an empty prototype store")
    if store.fusion_mode is not fusion_mode:
        raise ProtocolError(
            f"store was learned with {store.fusion_mode.value} fusion, "
            f"got {fusion_mode.value}"
        )
    visuals = np.asarray(visuals, dtype=np.float64)
    if visuals.ndim != 2:
        raise DimensionError(f"expected an (n, d) query matrix, got shape {visuals.shape}")
    if visuals.shape[1] != registry.dim:
        raise DimensionError(
            f"query dimension {visuals.shape[1]} != registry dimension {registry.dim}"
        )
    class_ids = store.class_ids()
    n = visuals.shape[0]
    c = len(class_ids)
    cos = np.empty((n, c))
    maha = np.empty((n, c))
    counts = np.empty(c)
    for j, cid in enumerate(class_ids):
        proto = store.prototype(cid)
        text = registry.text_embedding(cid).values
        if fusion_mode is FusionMode.SUM:
            queries = visuals + text
        else:
            queries = np.hstack([visuals, np.broadcast_to(text, visuals.shape)])
        mu = proto.mu.values
        mu_norm = float(np.linalg.norm(mu))
        q_norms = np.linalg.norm(queries, axis=1)
        if mu_norm == 0.0 or np.any(q_norms == 0.0):
            raise ZeroVectorError(
                f"zero-norm vector while scoring class {cid}; cosine undefined"
            )
        cos[:, j] = np.clip((queries @ mu) / (q_norms * mu_norm), -1.0, 1.0)
        diff = queries - mu
        maha[:, j] = np.maximum(0.0, np.einsum("ij,jk,ik->i", diff, proto.precision, diff))
        counts[j] = proto.sample_count
    ids = np.asarray(class_ids, dtype=np.int64)
    return CandidateScores(class_ids=ids, sample_counts=counts, cosine=cos, maha_raw=maha)


def combine_scores(
    scores: CandidateScores, cfg: HybridConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Blend the shared cues under one config.

    Returns (combined (n, C), maha_normalized (n, C), weights (C,)) where
    combined = w * (1 - d_hat) + (1 - w) * cosine.
    """
    d_hat = normalize_distances(scores.maha_raw)
    w = _weights(scores.sample_counts, cfg)
    combined = w * (1.0 - d_hat) + (1.0 - w) * scores.cosine
    return combined, d_hat, w


def predict(scores: CandidateScores, cfg: HybridConfig) -> np.ndarray:
    """Predicted class id per query; argmax ties go to the lowest class id."""
    if cfg.scorer is Scorer.MAHALANOBIS_ONLY:
        # Ranked by raw distance; class ids ascend, so the first minimum
        # is the lowest-id winner.
        idx = np.argmin(scores.maha_raw, axis=1)
    else:
        combined, _, _ = combine_scores(scores, cfg)
        idx = np.argmax(combined, axis=1)
    return scores.class_ids[idx]


def classify(
    visual: EmbeddingVector,
    store: PrototypeStore,
    registry: ClassRegistry,
    cfg: HybridConfig,
    fusion_mode: FusionMode,
) -> tuple[int, ScoreBreakdown]:
    """Classify one query and return the winner with its full score table."""
    scores = score_candidates(visual.values[None, :], store, registry, fusion_mode)
    combined, d_hat, w = combine_scores(scores, cfg)
    pred = int(predict(scores, cfg)[0])
    entries = tuple(
        ScoreEntry(
            class_id=int(scores.class_ids[j]),
            cosine=float(scores.cosine[0, j]),
            maha_raw=float(scores.maha_raw[0, j]),
            maha_normalized=float(d_hat[0, j]),
            weight=float(w[j]),
            score=float(combined[0, j]),
        )
        for j in range(scores.class_ids.shape[0])
    )
    return pred, ScoreBreakdown(entries)


def classify_batch(
    visuals: np.ndarray,
    store: PrototypeStore,
    registry: ClassRegistry,
    cfg: HybridConfig,
    fusion_mode: FusionMode,
) -> np.ndarray:
    """Predicted class ids for an (n, d) batch of visual embeddings."""
    return predict(score_candidates(visuals, store, registry, fusion_mode), cfg)
