"""Domain vocabulary: embeddings, samples, class registry, tasks, streams.

All types are immutable after construction (frozen dataclasses over
read-only float64 arrays) and validate their invariants eagerly, so
downstream numerical code never re-checks shapes or finiteness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, ProtocolError


class FusionMode(str, Enum):
    SUM = "sum"
    CONCAT = "concat"


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"

    @property
    def code(self) -> int:
        return 0 if self is Split.TRAIN else 1


def _frozen_f64(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


def _check_vector(arr: np.ndarray, what: str) -> None:
    if arr.ndim != 1 or arr.size < 1:
        raise DimensionError(f"{what} must be a non-empty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{what} contains non-finite entries")


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    """A d-dimensional real feature vector, stored as read-only float64."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = _frozen_f64(self.values)
        _check_vector(arr, "embedding")
        object.__setattr__(self, "values", arr)

    @property
    def d(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True, eq=False)
class FusedEmbedding:
    """A visual embedding fused with a text embedding.

    Sum fusion keeps the source dimension; concat fusion doubles it, so a
    concat-fused vector must have even length.
    """

    values: np.ndarray
    fusion_mode: FusionMode

    def __post_init__(self) -> None:
        arr = _frozen_f64(self.values)
        _check_vector(arr, "fused embedding")
        if self.fusion_mode is FusionMode.CONCAT and arr.shape[0] % 2 != 0:
            raise DimensionError(
                f"concat-fused vector must have even length, got {arr.shape[0]}"
            )
        object.__setattr__(self, "values", arr)

    @property
    def d_fused(self) -> int:
        return int(self.values.shape[0])


def fuse_embedding(
    visual: EmbeddingVector, text: EmbeddingVector, mode: FusionMode
) -> FusedEmbedding:
    """Fuse a visual and a text embedding of equal dimension.

    Sum mode returns the element-wise sum (length d); concat mode returns
    the visual vector followed by the text vector (length 2d).
    """
    if visual.d != text.d:
        raise DimensionError(
            f"visual dimension {visual.d} != text dimension {text.d}"
        )
    if mode is FusionMode.SUM:
        values = visual.values + text.values
    else:
        values = np.concatenate([visual.values, text.values])
    return FusedEmbedding(values, mode)


@dataclass(frozen=True, eq=False)
class LabeledSample:
    embedding: EmbeddingVector
    class_id: int
    domain_id: int
    split: Split

    def __post_init__(self) -> None:
        if self.class_id < 0:
            raise ConfigError(f"class_id must be non-negative, got {self.class_id}")
        if self.domain_id < 0:
            raise ConfigError(f"domain_id must be non-negative, got {self.domain_id}")


@dataclass(frozen=True, eq=False)
class RegistryEntry:
    domain_id: int
    class_name: str
    text_embedding: EmbeddingVector


class ClassRegistry:
    """Global class table: id -> (domain, name, text embedding).

    Class ids are unique across the whole registry and every text
    embedding shares one dimension d.
    """

    def __init__(self, entries: Mapping[int, RegistryEntry]):
        if not entries:
            raise ConfigError("registry must contain at least one class")
        dims = {e.text_embedding.d for e in entries.values()}
        if len(dims) != 1:
            raise DimensionError(f"text embeddings have mixed dimensions {sorted(dims)}")
        self._entries: dict[int, RegistryEntry] = dict(entries)
        self._dim = dims.pop()

    @property
    def dim(self) -> int:
        return self._dim

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, class_id: int) -> bool:
        return class_id in self._entries

    def class_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self._entries))

    def entry(self, class_id: int) -> RegistryEntry:
        try:
            return self._entries[class_id]
        except KeyError:
            raise ProtocolError(f"class_id {class_id} is not registered") from None

    def text_embedding(self, class_id: int) -> EmbeddingVector:
        return self.entry(class_id).text_embedding

    def domain_of(self, class_id: int) -> int:
        return self.entry(class_id).domain_id

    def domain_ids(self) -> tuple[int, ...]:
        return tuple(sorted({e.domain_id for e in self._entries.values()}))

    def classes_in_domain(self, domain_id: int) -> tuple[int, ...]:
        return tuple(
            sorted(c for c, e in self._entries.items() if e.domain_id == domain_id)
        )

    def merged_with(self, other: "ClassRegistry") -> "ClassRegistry":
        overlap = set(self._entries) & set(other._entries)
        if overlap:
            raise ProtocolError(f"duplicate class ids across registries: {sorted(overlap)}")
        combined = dict(self._entries)
        combined.update(other._entries)
        return ClassRegistry(combined)


@dataclass(frozen=True, eq=False)
class DomainTask:
    """One incremental step: a domain's classes, shot counts, and splits."""

    domain_id: int
    class_ids: tuple[int, ...]
    shots: Mapping[int, int]
    train_samples: tuple[LabeledSample, ...]
    test_samples: tuple[LabeledSample, ...]

    def __post_init__(self) -> None:
        class_ids = tuple(self.class_ids)
        if len(set(class_ids)) != len(class_ids):
            raise ProtocolError(f"duplicate class ids within domain {self.domain_id}")
        shots = dict(self.shots)
        if set(shots) != set(class_ids):
            raise ProtocolError("shots must cover exactly the task's class ids")
        for c, k in shots.items():
            if k < 1:
                raise ProtocolError(f"class {c} declares K_c={k}; shot counts must be >= 1")
        train = tuple(self.train_samples)
        test = tuple(self.test_samples)
        counts: dict[int, int] = {c: 0 for c in class_ids}
        for s in train:
            if s.split is not Split.TRAIN:
                raise ProtocolError("train_samples contains a non-train sample")
            self._check_sample(s, class_ids)
            counts[s.class_id] += 1
        for c in class_ids:
            if counts[c] != shots[c]:
                raise ProtocolError(
                    f"class {c}: {counts[c]} train samples but K_c={shots[c]}"
                )
        for s in test:
            if s.split is not Split.TEST:
                raise ProtocolError("test_samples contains a non-test sample")
            self._check_sample(s, class_ids)
        object.__setattr__(self, "class_ids", class_ids)
        object.__setattr__(self, "shots", shots)
        object.__setattr__(self, "train_samples", train)
        object.__setattr__(self, "test_samples", test)

    def _check_sample(self, s: LabeledSample, class_ids: tuple[int, ...]) -> None:
        if s.domain_id != self.domain_id:
            raise ProtocolError(
                f"sample from domain {s.domain_id} inside task for domain {self.domain_id}"
            )
        if s.class_id not in class_ids:
            raise ProtocolError(
                f"sample class {s.class_id} not declared in domain {self.domain_id}"
            )

    @property
    def total_shots(self) -> int:
        return sum(self.shots.values())

    def train_for_class(self, class_id: int) -> tuple[LabeledSample, ...]:
        return tuple(s for s in self.train_samples if s.class_id == class_id)


@dataclass(frozen=True, eq=False)
class TaskStream:
    """Ordered sequence of domain tasks with pairwise disjoint class sets."""

    tasks: tuple[DomainTask, ...]
    order: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        tasks = tuple(self.tasks)
        seen: set[int] = set()
        for task in tasks:
            overlap = seen & set(task.class_ids)
            if overlap:
                raise ProtocolError(
                    f"class ids {sorted(overlap)} appear in more than one task"
                )
            seen.update(task.class_ids)
        order = tuple(self.order) if self.order else tuple(range(len(tasks)))
        object.__setattr__(self, "tasks", tasks)
        object.__setattr__(self, "order", order)

    def __len__(self) -> int:
        return len(self.tasks)

    def __iter__(self) -> Iterator[DomainTask]:
        return iter(self.tasks)

    def all_class_ids(self) -> tuple[int, ...]:
        out: list[int] = []
        for task in self.tasks:
            out.extend(task.class_ids)
        return tuple(out)


def assemble_stream(
    tasks: Sequence[DomainTask],
    order: Sequence[int] | None = None,
    registry: ClassRegistry | None = None,
) -> TaskStream:
    """Reorder tasks by a permutation and validate all stream invariants.

    ``order`` maps output position to input index; ``order=None`` keeps the
    given order. When a registry is supplied, every sample's class id must
    be registered to the sample's own domain.
    """
    tasks = list(tasks)
    if order is None:
        perm = list(range(len(tasks)))
    else:
        perm = [int(i) for i in order]
        if sorted(perm) != list(range(len(tasks))):
            raise ConfigError(
                f"order {perm} is not a permutation of 0..{len(tasks) - 1}"
            )
    ordered = [tasks[i] for i in perm]
    if registry is not None:
        for task in ordered:
            for s in list(task.train_samples) + list(task.test_samples):
                if s.class_id not in registry:
                    raise ProtocolError(
                        f"sample class {s.class_id} missing from the class registry"
                    )
                if registry.domain_of(s.class_id) != s.domain_id:
                    raise ProtocolError(
                        f"class {s.class_id} registered to domain "
                        f"{registry.domain_of(s.class_id)} but sampled in {s.domain_id}"
                    )
    return TaskStream(tuple(ordered), tuple(perm))


def stack_embeddings(samples: Iterable[LabeledSample]) -> np.ndarray:
    """Stack sample embeddings into an (n, d) float64 matrix."""
    return np.stack([s.embedding.values for s in samples])
