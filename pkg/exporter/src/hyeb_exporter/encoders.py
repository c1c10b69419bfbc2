"""Image/text encoders behind a small common interface.

The default is a frozen CLIP checkpoint via transformers; raw encoder
outputs are written as-is (no normalization), keeping all numerical
policy in the consuming library. A deterministic pixel-statistics
encoder is provided for offline tests and smoke runs.
"""

from __future__ import annotations

import hashlib
import logging
from typing import Protocol, Sequence

import numpy as np
from PIL import Image

log = logging.getLogger("hyeb_exporter")


class Encoder(Protocol):
    """Maps images and texts to fixed-width float32 embeddings."""

    @property
    def dim(self) -> int: ...

    def encode_images(self, paths: Sequence[str]) -> np.ndarray: ...

    def encode_texts(self, texts: Sequence[str]) -> np.ndarray: ...


def _to_rgb(image: Image.Image, path: str) -> Image.Image:
    if image.mode != "RGB":
        log.debug("replicating channels for non-RGB image %s (mode %s)", path, image.mode)
        return image.convert("RGB")
    return image


class ClipEncoder:
    """Frozen CLIP image/text towers, eval mode, raw pooled outputs."""

    def __init__(self, model_id: str = "openai/clip-vit-base-patch16",
                 batch_size: int = 32):
        import torch
        from transformers import CLIPModel, CLIPProcessor

        self._torch = torch
        self.model = CLIPModel.from_pretrained(model_id)
        self.model.eval()
        self.processor = CLIPProcessor.from_pretrained(model_id)
        self.batch_size = batch_size
        self._dim = int(self.model.config.projection_dim)

    @property
    def dim(self) -> int:
        return self._dim

    def encode_images(self, paths: Sequence[str]) -> np.ndarray:
        torch = self._torch
        chunks = []
        for start in range(0, len(paths), self.batch_size):
            batch = []
            for path in paths[start : start + self.batch_size]:
                with Image.open(path) as img:
                    batch.append(_to_rgb(img, path).copy())
            inputs = self.processor(images=batch, return_tensors="pt")
            with torch.no_grad():
                feats = self.model.get_image_features(**inputs)
            chunks.append(feats.cpu().numpy().astype(np.float32))
        return np.concatenate(chunks, axis=0)

    def encode_texts(self, texts: Sequence[str]) -> np.ndarray:
        torch = self._torch
        inputs = self.processor(text=list(texts), return_tensors="pt", padding=True)
        with torch.no_grad():
            feats = self.model.get_text_features(**inputs)
        return feats.cpu().numpy().astype(np.float32)


class PixelStatsEncoder:
    """Deterministic offline encoder built on raw pixel statistics.

    Images are downsampled to a fixed grayscale thumbnail and projected
    with a seeded Gaussian matrix; texts are hashed to a seed and drawn as
    a Gaussian vector. No learned weights, no network access, bit-stable
    across runs, which makes it suitable for export-pipeline tests.
    """

    THUMB = 16

    def __init__(self, dim: int = 32, seed: int = 1234):
        self._dim = int(dim)
        rng = np.random.default_rng(seed)
        n_px = self.THUMB * self.THUMB
        self._projection = (
            rng.standard_normal((n_px, self._dim)) / np.sqrt(n_px)
        ).astype(np.float64)

    @property
    def dim(self) -> int:
        return self._dim

    def encode_images(self, paths: Sequence[str]) -> np.ndarray:
        rows = []
        for path in paths:
            with Image.open(path) as img:
                gray = _to_rgb(img, path).convert("L").resize(
                    (self.THUMB, self.THUMB), Image.BILINEAR
                )
            pixels = np.asarray(gray, dtype=np.float64).reshape(-1) / 255.0
            rows.append(pixels @ self._projection)
        return np.asarray(rows, dtype=np.float32)

    def encode_texts(self, texts: Sequence[str]) -> np.ndarray:
        rows = []
        for text in texts:
            digest = hashlib.sha256(text.encode("utf-8")).digest()
            seed = int.from_bytes(digest[:8], "little")
            rng = np.random.default_rng(seed)
            rows.append(rng.standard_normal(self._dim))
        return np.asarray(rows, dtype=np.float32)


def make_encoder(identifier: str) -> Encoder:
    """Build an encoder from an identifier string.

    ``clip`` or ``clip:<model_id>`` selects the CLIP path;
    ``pixel-stats`` or ``pixel-stats:<dim>`` the offline encoder.
    """
    kind, _, arg = identifier.partition(":")
    if kind == "clip":
        return ClipEncoder(arg or "openai/clip-vit-base-patch16")
    if kind == "pixel-stats":
        return PixelStatsEncoder(int(arg) if arg else 32)
    raise ValueError(f"unknown encoder identifier {identifier!r}")
