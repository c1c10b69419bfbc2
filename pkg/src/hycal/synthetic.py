"""Seeded generators for heterogeneous synthetic embedding domains.

Domains are anisotropic Gaussian class clusters: class means drawn in a
ball, per-class covariance built from a shared eigenvalue spectrum under
a random per-class rotation, and text anchors modeled as the true class
mean plus seeded noise so zero-shot classification is meaningful but
imperfect. Everything is deterministic given the spec's seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    ClassRegistry,
    DomainTask,
    EmbeddingVector,
    LabeledSample,
    RegistryEntry,
    Split,
    TaskStream,
    assemble_stream,
)
from .errors import ConfigError


@dataclass(frozen=True, eq=False)
class SyntheticDomainSpec:
    domain_id: int
    n_classes: int
    dim: int
    dispersion: float  # radius of the ball holding class means
    scale: float  # overall per-class covariance scale (sigma)
    spectrum: tuple[float, ...]  # per-axis eigenscales, length dim
    train_count: int | tuple[int, ...]  # per class, scalar or one per class
    test_count: int
    text_noise: float | None = None  # None -> 0.5 * scale
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_classes < 1:
            raise ConfigError(f"n_classes must be >= 1, got {self.n_classes}")
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")
        if self.dispersion < 0.0 or self.scale < 0.0:
            raise ConfigError("dispersion and scale must be non-negative")
        spectrum = tuple(float(s) for s in self.spectrum)
        if len(spectrum) != self.dim or any(s <= 0.0 for s in spectrum):
            raise ConfigError(
                f"spectrum must hold {self.dim} positive eigenscales, got {spectrum}"
            )
        counts = self.per_class_train_counts(validate_only=True)
        if any(k < 1 for k in counts):
            raise ConfigError("per-class train counts must be >= 1")
        if self.test_count < 1:
            raise ConfigError(f"test_count must be >= 1, got {self.test_count}")
        if self.text_noise is not None and self.text_noise < 0.0:
            raise ConfigError(f"text_noise must be >= 0, got {self.text_noise}")
        object.__setattr__(self, "spectrum", spectrum)

    def per_class_train_counts(self, validate_only: bool = False) -> tuple[int, ...]:
        if isinstance(self.train_count, int):
            return tuple([self.train_count] * self.n_classes)
        counts = tuple(int(k) for k in self.train_count)
        if len(counts) != self.n_classes:
            raise ConfigError(
                f"train_count lists {len(counts)} classes but spec declares {self.n_classes}"
            )
        return counts

    @property
    def effective_text_noise(self) -> float:
        return 0.5 * self.scale if self.text_noise is None else self.text_noise


def _random_rotation(rng: np.random.Generator, dim: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def generate_domain(
    spec: SyntheticDomainSpec, class_id_start: int = 0
) -> tuple[DomainTask, dict[int, RegistryEntry]]:
    """Generate one domain's task and its registry entries.

    Class ids are assigned sequentially from ``class_id_start`` so multiple
    domains can share one global id space.
    """
    rng = np.random.default_rng(spec.seed)
    d = spec.dim
    sqrt_spec = spec.scale * np.sqrt(np.asarray(spec.spectrum))
    train_counts = spec.per_class_train_counts()
    class_ids = tuple(range(class_id_start, class_id_start + spec.n_classes))
    entries: dict[int, RegistryEntry] = {}
    train: list[LabeledSample] = []
    test: list[LabeledSample] = []
    shots: dict[int, int] = {}
    for j, cid in enumerate(class_ids):
        direction = rng.standard_normal(d)
        norm = np.linalg.norm(direction)
        if norm == 0.0:
            direction = np.eye(d)[0]
            norm = 1.0
        radius = spec.dispersion * rng.uniform() ** (1.0 / d)
        mean = (direction / norm) * radius
        rotation = _random_rotation(rng, d)
        transform = rotation * sqrt_spec  # columns scaled by sqrt eigenvalues
        text = mean + spec.effective_text_noise * rng.standard_normal(d)
        entries[cid] = RegistryEntry(
            domain_id=spec.domain_id,
            class_name=f"d{spec.domain_id}_c{j}",
            text_embedding=EmbeddingVector(text),
        )
        k = train_counts[j]
        shots[cid] = k
        train_x = mean + rng.standard_normal((k, d)) @ transform.T
        test_x = mean + rng.standard_normal((spec.test_count, d)) @ transform.T
        train.extend(
            LabeledSample(EmbeddingVector(row), cid, spec.domain_id, Split.TRAIN)
            for row in train_x
        )
        test.extend(
            LabeledSample(EmbeddingVector(row), cid, spec.domain_id, Split.TEST)
            for row in test_x
        )
    task = DomainTask(
        domain_id=spec.domain_id,
        class_ids=class_ids,
        shots=shots,
        train_samples=tuple(train),
        test_samples=tuple(test),
    )
    return task, entries


def distribute_total(total: int, n_classes: int) -> tuple[int, ...]:
    """Spread a per-domain sample budget over classes as evenly as possible."""
    if total < n_classes:
        raise ConfigError(
            f"budget {total} cannot give each of {n_classes} classes one sample"
        )
    base, rem = divmod(total, n_classes)
    return tuple(base + 1 if j < rem else base for j in range(n_classes))


def geometric_spectrum(dim: int, span: float) -> tuple[float, ...]:
    """Eigenscales spaced geometrically from 1 up to ``span``."""
    if span < 1.0:
        raise ConfigError(f"spectrum span must be >= 1, got {span}")
    return tuple(np.geomspace(1.0, span, dim))


def domain_gravity_scenario(
    ratio: float,
    entropy_ratio: float,
    dim: int = 5,
    seed: int = 0,
    n_classes_small: int = 11,
    n_classes_large: int = 47,
    total_large: int = 470,
    test_count: int = 20,
    dispersion: float = 12.0,
    scale: float = 1.0,
    small_spectrum_scale: float = 2.0,
    anisotropy_span: float = 16.0,
    text_noise: float | tuple[float, float] | None = (0.3, 2.0),
) -> tuple[TaskStream, ClassRegistry]:
    """Two-domain stream with a sample-budget and entropy imbalance.

    A small low-budget domain (isotropic clusters, clean text anchors) is
    followed by a large domain whose training budget exceeds the first by
    ``ratio``, whose clusters are strongly anisotropic with eigenvalues
    additionally inflated by ``entropy_ratio``, and whose text anchors are
    noisier. The defaults give the two distance cues complementary failure
    modes: the scarce domain's per-class shot counts sit below the
    dimension (unreliable covariance), while the rich domain's angular
    crowding blunts the directional cue.
    """
    if ratio < 1.0 or entropy_ratio < 1.0:
        raise ConfigError("ratio and entropy_ratio must be >= 1")
    if isinstance(text_noise, tuple):
        noise_small, noise_large = text_noise
    else:
        noise_small = noise_large = text_noise
    total_small = int(round(total_large / ratio))
    seeds = np.random.SeedSequence(seed).generate_state(2, dtype=np.uint64)
    base_spectrum = geometric_spectrum(dim, anisotropy_span)
    spec_small = SyntheticDomainSpec(
        domain_id=0,
        n_classes=n_classes_small,
        dim=dim,
        dispersion=dispersion,
        scale=scale,
        spectrum=tuple(np.full(dim, small_spectrum_scale)),
        train_count=distribute_total(total_small, n_classes_small),
        test_count=test_count,
        text_noise=noise_small,
        seed=int(seeds[0]),
    )
    spec_large = SyntheticDomainSpec(
        domain_id=1,
        n_classes=n_classes_large,
        dim=dim,
        dispersion=dispersion,
        scale=scale,
        spectrum=tuple(entropy_ratio * s for s in base_spectrum),
        train_count=distribute_total(total_large, n_classes_large),
        test_count=test_count,
        text_noise=noise_large,
        seed=int(seeds[1]),
    )
    task_small, entries_small = generate_domain(spec_small, class_id_start=0)
    task_large, entries_large = generate_domain(spec_large, class_id_start=n_classes_small)
    registry = ClassRegistry({**entries_small, **entries_large})
    stream = assemble_stream([task_small, task_large], registry=registry)
    return stream, registry


def gaussian_entropy_nats(cov: np.ndarray) -> float:
    """Differential entropy 0.5 * log det(2*pi*e * cov) of a Gaussian."""
    cov = np.asarray(cov, dtype=np.float64)
    d = cov.shape[0]
    sign, logdet = np.linalg.slogdet(2.0 * np.pi * np.e * cov)
    if sign <= 0:
        raise ConfigError("covariance must be positive definite")
    return float(0.5 * logdet)


def generate_domains(
    specs: Sequence[SyntheticDomainSpec], class_id_start: int = 0
) -> tuple[TaskStream, ClassRegistry]:
    """Generate several domains into one stream with a shared registry."""
    tasks: list[DomainTask] = []
    entries: dict[int, RegistryEntry] = {}
    next_id = class_id_start
    for spec in specs:
        task, domain_entries = generate_domain(spec, class_id_start=next_id)
        tasks.append(task)
        entries.update(domain_entries)
        next_id += spec.n_classes
    registry = ClassRegistry(entries)
    return assemble_stream(tasks, registry=registry), registry
