"""Incremental per-class prototype learning over fused embeddings.

Each class is summarized once, from its own few-shot samples only, as a
mean vector, a shrinkage-regularized precision matrix, and the sample
count. Prototypes are immutable after insertion, which makes the final
store independent of the order in which tasks arrive.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from .core import ClassRegistry, DomainTask, FusedEmbedding, FusionMode, fuse_embedding
from .errors import (
    ConfigError,
    DimensionError,
    ProtocolError,
    SingularCovarianceError,
)

_SYMMETRY_RTOL = 1e-10


@dataclass(frozen=True)
class RegularizationConfig:
    """Covariance shrinkage (1-lam)*Sigma + lam*gamma*I."""

    lam: float = 1e-4
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lam must lie in [0, 1], got {self.lam}")
        if not self.gamma > 0.0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")


@dataclass(frozen=True, eq=False)
class ClassPrototype:
    """Per-class summary: mean, precision matrix, and sample count."""

    class_id: int
    mu: FusedEmbedding
    precision: np.ndarray
    sample_count: int

    def __post_init__(self) -> None:
        prec = np.array(self.precision, dtype=np.float64, copy=True)
        d = self.mu.d_fused
        if prec.shape != (d, d):
            raise DimensionError(
                f"precision shape {prec.shape} does not match mean dimension {d}"
            )
        if not np.all(np.isfinite(prec)):
            raise ConfigError("precision contains non-finite entries")
        scale = max(float(np.abs(prec).max()), np.finfo(np.float64).tiny)
        if float(np.abs(prec - prec.T).max()) > _SYMMETRY_RTOL * scale:
            raise ConfigError("precision is not symmetric")
        try:
            np.linalg.cholesky(prec)
        except np.linalg.LinAlgError:
            raise SingularCovarianceError(
                f"precision for class {self.class_id} is not positive definite"
            ) from None
        if self.sample_count < 1:
            raise ProtocolError(f"sample_count must be >= 1, got {self.sample_count}")
        prec.setflags(write=False)
        object.__setattr__(self, "precision", prec)

    @property
    def d_fused(self) -> int:
        return self.mu.d_fused


def learn_prototype(
    fused_samples: Sequence[FusedEmbedding],
    class_id: int,
    reg: RegularizationConfig,
) -> ClassPrototype:
    """Learn one prototype from a class's fused training samples.

    The mean is the arithmetic average, the covariance the biased
    (divide-by-K) sample covariance, and the precision the inverse of the
    shrunk covariance (1-lam)*Sigma + lam*gamma*I, computed through a
    Cholesky factorization so a non-PD matrix fails loudly instead of
    silently falling back to a pseudo-inverse.
    """
    if len(fused_samples) == 0:
        raise ProtocolError(f"class {class_id} has no training samples")
    mode = fused_samples[0].fusion_mode
    d = fused_samples[0].d_fused
    for s in fused_samples:
        if s.fusion_mode is not mode:
            raise ProtocolError("fused samples mix fusion modes")
        if s.d_fused != d:
            raise DimensionError(
                f"fused samples mix dimensions {d} and {s.d_fused}"
            )
    x = np.stack([s.values for s in fused_samples])
    k = x.shape[0]
    # Shifted mean: exact when all samples coincide (n identical copies
    # average to the sample itself, bit for bit, for any n).
    mu = x[0] + (x - x[0]).mean(axis=0)
    centered = x - mu
    cov = (centered.T @ centered) / k
    shrunk = (1.0 - reg.lam) * cov + (reg.lam * reg.gamma) * np.eye(d)
    try:
        cho = scipy.linalg.cho_factor(shrunk, lower=True)
    except scipy.linalg.LinAlgError:
        raise SingularCovarianceError(
            f"regularized covariance for class {class_id} is singular "
            f"(lam={reg.lam}, gamma={reg.gamma})"
        ) from None
    precision = scipy.linalg.cho_solve(cho, np.eye(d))
    precision = (precision + precision.T) / 2.0
    return ClassPrototype(
        class_id=class_id,
        mu=FusedEmbedding(mu, mode),
        precision=precision,
        sample_count=k,
    )


class PrototypeStore:
    """Read-only map of class id -> prototype plus the ingestion order.

    Stores are grown functionally: ``ingest_task`` returns a new store that
    shares the existing prototype objects, so a frozen store can be handed
    to any number of reader threads.
    """

    def __init__(
        self,
        prototypes: Mapping[int, ClassPrototype] | None = None,
        learned_order: Sequence[int] = (),
        fusion_mode: FusionMode | None = None,
    ):
        protos = dict(prototypes) if prototypes else {}
        order = tuple(learned_order) if learned_order else tuple(protos)
        if sorted(order) != sorted(protos):
            raise ProtocolError("learned_order must list exactly the stored class ids")
        for cid, proto in protos.items():
            if proto.class_id != cid:
                raise ProtocolError(
                    f"prototype for class {proto.class_id} stored under key {cid}"
                )
        modes = {p.mu.fusion_mode for p in protos.values()}
        if fusion_mode is None and len(modes) == 1:
            fusion_mode = modes.pop()
        elif modes and modes != {fusion_mode}:
            raise ProtocolError("prototypes do not match the store's fusion mode")
        dims = {p.d_fused for p in protos.values()}
        if len(dims) > 1:
            raise DimensionError(f"prototypes have mixed dimensions {sorted(dims)}")
        self._prototypes = protos
        self._learned_order = order
        self._fusion_mode = fusion_mode

    @property
    def fusion_mode(self) -> FusionMode | None:
        return self._fusion_mode

    @property
    def learned_order(self) -> tuple[int, ...]:
        return self._learned_order

    def __len__(self) -> int:
        return len(self._prototypes)

    def __contains__(self, class_id: int) -> bool:
        return class_id in self._prototypes

    def class_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self._prototypes))

    def prototype(self, class_id: int) -> ClassPrototype:
        try:
            return self._prototypes[class_id]
        except KeyError:
            raise ProtocolError(f"no prototype learned for class {class_id}") from None

    def with_prototypes(
        self, new: Sequence[ClassPrototype], fusion_mode: FusionMode
    ) -> "PrototypeStore":
        if self._fusion_mode is not None and fusion_mode is not self._fusion_mode:
            raise ProtocolError(
                f"store was built with {self._fusion_mode.value} fusion, "
                f"got {fusion_mode.value}"
            )
        merged = dict(self._prototypes)
        order = list(self._learned_order)
        for proto in new:
            if proto.class_id in merged:
                raise ProtocolError(f"class {proto.class_id} already has a prototype")
            merged[proto.class_id] = proto
            order.append(proto.class_id)
        return PrototypeStore(merged, order, fusion_mode)


def ingest_task(
    store: PrototypeStore,
    task: DomainTask,
    registry: ClassRegistry,
    fusion_mode: FusionMode,
    reg: RegularizationConfig,
) -> PrototypeStore:
    """Learn one prototype per new class and return the grown store.

    Only the incoming task's training samples are touched; prototypes
    already in the store are carried over by reference, bit-identical.
    """
    present = [c for c in task.class_ids if c in store]
    if present:
        raise ProtocolError(
            f"classes {present} were already learned; tasks must be disjoint"
        )
    new: list[ClassPrototype] = []
    for class_id in task.class_ids:
        text = registry.text_embedding(class_id)
        fused = [
            fuse_embedding(s.embedding, text, fusion_mode)
            for s in task.train_for_class(class_id)
        ]
        new.append(learn_prototype(fused, class_id, reg))
    return store.with_prototypes(new, fusion_mode)
