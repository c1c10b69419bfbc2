"""Folder-to-HYEB export pipeline.

Expects an image-folder layout with explicit splits::

    root/
      train/<class name>/*.png|jpg|...
      test/<class name>/*.png|jpg|...

One export produces one domain: every class directory becomes a class
with a text embedding of its prompt, and every image a labeled sample.
The on-disk split is preserved. Files are written through the consuming
library's dataset writer, so anything exported here validates under its
reader by construction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hycal import (
    ClassRegistry,
    Dataset,
    EmbeddingVector,
    LabeledSample,
    RegistryEntry,
    Split,
    write_dataset,
)

from .encoders import Encoder, make_encoder

log = logging.getLogger("hyeb_exporter")

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".gif", ".tiff", ".webp")


@dataclass(frozen=True)
class ExportSpec:
    dataset_name: str
    data_root: str
    output_path: str
    encoder: str = "clip"
    prompt_template: str = "a photo of a {}"
    per_class_cap: int | None = None
    domain_id: int = 0
    class_id_offset: int = 0

    def __post_init__(self) -> None:
        if self.per_class_cap is not None and self.per_class_cap < 1:
            raise ValueError(f"per_class_cap must be >= 1, got {self.per_class_cap}")
        if "{}" not in self.prompt_template:
            raise ValueError("prompt_template must contain a '{}' placeholder")


def _class_dirs(split_dir: Path) -> dict[str, list[Path]]:
    if not split_dir.is_dir():
        return {}
    out: dict[str, list[Path]] = {}
    for class_dir in sorted(p for p in split_dir.iterdir() if p.is_dir()):
        images = sorted(
            p for p in class_dir.iterdir()
            if p.suffix.lower() in IMAGE_EXTENSIONS and p.is_file()
        )
        if images:
            out[class_dir.name] = images
    return out


def export(spec: ExportSpec, encoder: Encoder | None = None) -> Path:
    """Embed every image and class prompt and write the dataset file."""
    if encoder is None:
        encoder = make_encoder(spec.encoder)
    root = Path(spec.data_root)
    if not root.is_dir():
        raise FileNotFoundError(f"data root {root} does not exist")
    train = _class_dirs(root / "train")
    test = _class_dirs(root / "test")
    class_names = sorted(set(train) | set(test))
    if not class_names:
        raise FileNotFoundError(
            f"{root} holds no class directories under train/ or test/"
        )
    prompts = [spec.prompt_template.format(name) for name in class_names]
    text_embeddings = np.asarray(encoder.encode_texts(prompts))
    if text_embeddings.shape != (len(class_names), encoder.dim):
        raise ValueError(
            f"encoder returned text embeddings of shape {text_embeddings.shape}, "
            f"expected ({len(class_names)}, {encoder.dim})"
        )
    entries: dict[int, RegistryEntry] = {}
    samples: list[LabeledSample] = []
    for local_id, name in enumerate(class_names):
        class_id = spec.class_id_offset + local_id
        entries[class_id] = RegistryEntry(
            domain_id=spec.domain_id,
            class_name=name,
            text_embedding=EmbeddingVector(text_embeddings[local_id].astype(np.float64)),
        )
        for split, pool in ((Split.TRAIN, train), (Split.TEST, test)):
            paths = pool.get(name, [])
            if spec.per_class_cap is not None:
                paths = paths[: spec.per_class_cap]
            if not paths:
                continue
            vectors = np.asarray(encoder.encode_images([str(p) for p in paths]))
            if vectors.shape != (len(paths), encoder.dim):
                raise ValueError(
                    f"encoder returned image embeddings of shape {vectors.shape}, "
                    f"expected ({len(paths)}, {encoder.dim})"
                )
            samples.extend(
                LabeledSample(
                    EmbeddingVector(vec.astype(np.float64)),
                    class_id=class_id,
                    domain_id=spec.domain_id,
                    split=split,
                )
                for vec in vectors
            )
    dataset = Dataset(ClassRegistry(entries), samples)
    out = Path(spec.output_path)
    write_dataset(out, dataset)
    log.info(
        "exported %s: %d classes, %d samples, dim %d -> %s",
        spec.dataset_name, len(entries), len(samples), encoder.dim, out,
    )
    return out


def merge(inputs: list[str], output_path: str) -> Path:
    """Combine several single-domain exports into one dataset file.

    Class ids must not collide across inputs (use class_id_offset when
    exporting).
    """
    from hycal import read_dataset

    if not inputs:
        raise ValueError("merge needs at least one input file")
    datasets = [read_dataset(p) for p in inputs]
    registry = datasets[0].registry
    samples = list(datasets[0].samples)
    for ds in datasets[1:]:
        registry = registry.merged_with(ds.registry)
        samples.extend(ds.samples)
    out = Path(output_path)
    write_dataset(out, Dataset(registry, samples))
    log.info("merged %d files, %d classes -> %s", len(inputs), len(registry), out)
    return out
