"""Shared builders for small deterministic fixtures."""

from __future__ import annotations

import numpy as np
import pytest

from hycal import (
    ClassRegistry,
    DomainTask,
    EmbeddingVector,
    FusionMode,
    LabeledSample,
    RegistryEntry,
    Split,
)


def make_registry(class_specs: dict[int, tuple[int, np.ndarray]]) -> ClassRegistry:
    """Registry from {class_id: (domain_id, text_vector)}."""
    return ClassRegistry(
        {
            cid: RegistryEntry(domain_id, f"c{cid}", EmbeddingVector(text))
            for cid, (domain_id, text) in class_specs.items()
        }
    )


def make_task(
    domain_id: int,
    class_blobs: dict[int, np.ndarray],
    n_test: int = 0,
    rng: np.random.Generator | None = None,
) -> DomainTask:
    """Task from {class_id: (k, d) train matrix}; test samples drawn near 0."""
    train = []
    test = []
    shots = {}
    for cid, blob in class_blobs.items():
        blob = np.atleast_2d(np.asarray(blob, dtype=np.float64))
        shots[cid] = blob.shape[0]
        train.extend(
            LabeledSample(EmbeddingVector(row), cid, domain_id, Split.TRAIN)
            for row in blob
        )
        for i in range(n_test):
            assert rng is not None
            row = blob[i % blob.shape[0]] + 0.01 * rng.standard_normal(blob.shape[1])
            test.append(LabeledSample(EmbeddingVector(row), cid, domain_id, Split.TEST))
    return DomainTask(
        domain_id=domain_id,
        class_ids=tuple(class_blobs),
        shots=shots,
        train_samples=tuple(train),
        test_samples=tuple(test),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240117)


@pytest.fixture
def sum_mode() -> FusionMode:
    return FusionMode.SUM
