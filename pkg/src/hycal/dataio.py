"""Binary dataset and prototype-snapshot formats.

Both formats are little-endian with fixed magics. Dataset files ("HYEB")
store 32-bit vectors exactly as an encoder produced them; vectors are
widened to float64 in memory. Snapshot files ("HYPS") store prototype
statistics at full 64-bit precision, one canonical record per class in
ascending class-id order.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    ClassRegistry,
    EmbeddingVector,
    FusedEmbedding,
    FusionMode,
    LabeledSample,
    RegistryEntry,
    Split,
)
from .errors import (
    ConfigError,
    FormatError,
    IntegrityError,
    ProtocolError,
    SingularCovarianceError,
    TruncatedError,
)
from .prototypes import ClassPrototype, PrototypeStore

DATASET_MAGIC = b"HYEB"
SNAPSHOT_MAGIC = b"HYPS"
FORMAT_VERSION = 1

_FUSION_CODES = {FusionMode.SUM: 0, FusionMode.CONCAT: 1}
_FUSION_FROM_CODE = {v: k for k, v in _FUSION_CODES.items()}


class Dataset:
    """In-memory dataset: a class registry plus its labeled samples."""

    def __init__(self, registry: ClassRegistry, samples: Sequence[LabeledSample]):
        self.registry = registry
        self.samples = tuple(samples)
        train: dict[int, list[LabeledSample]] = {}
        test: dict[int, list[LabeledSample]] = {}
        for s in self.samples:
            if s.class_id not in registry:
                raise ProtocolError(f"sample class {s.class_id} is not registered")
            if registry.domain_of(s.class_id) != s.domain_id:
                raise ProtocolError(
                    f"sample for class {s.class_id} carries domain {s.domain_id}, "
                    f"registry says {registry.domain_of(s.class_id)}"
                )
            if s.split is Split.TRAIN:
                train.setdefault(s.class_id, []).append(s)
            else:
                test.setdefault(s.domain_id, []).append(s)
        self._train_by_class = {c: tuple(v) for c, v in train.items()}
        self._test_by_domain = {d: tuple(v) for d, v in test.items()}

    def domain_ids(self) -> tuple[int, ...]:
        return self.registry.domain_ids()

    def train_pool(self, class_id: int) -> tuple[LabeledSample, ...]:
        return self._train_by_class.get(class_id, ())

    def test_split(self, domain_id: int) -> tuple[LabeledSample, ...]:
        return self._test_by_domain.get(domain_id, ())


class _Cursor:
    """Sequential reader over a byte buffer with offset-aware errors."""

    def __init__(self, buf: bytes, label: str):
        self.buf = buf
        self.off = 0
        self.label = label

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.off + size > len(self.buf):
            raise TruncatedError(
                f"{self.label}: needed {size} bytes at offset {self.off}, "
                f"file ends at {len(self.buf)}"
            )
        out = struct.unpack_from(fmt, self.buf, self.off)
        self.off += size
        return out

    def take_bytes(self, n: int) -> bytes:
        if self.off + n > len(self.buf):
            raise TruncatedError(
                f"{self.label}: needed {n} bytes at offset {self.off}, "
                f"file ends at {len(self.buf)}"
            )
        out = self.buf[self.off : self.off + n]
        self.off += n
        return out

    def take_f32(self, n: int) -> np.ndarray:
        raw = self.take_bytes(4 * n)
        return np.frombuffer(raw, dtype="<f4", count=n)

    def take_f64(self, n: int) -> np.ndarray:
        raw = self.take_bytes(8 * n)
        return np.frombuffer(raw, dtype="<f8", count=n)

    def expect_end(self) -> None:
        if self.off != len(self.buf):
            raise FormatError(
                f"{self.label}: {len(self.buf) - self.off} trailing bytes "
                f"after offset {self.off}"
            )


def _check_u(value: int, bits: int, what: str) -> int:
    value = int(value)
    if not 0 <= value < (1 << bits):
        raise ConfigError(f"{what} {value} does not fit in u{bits}")
    return value


def write_dataset(path: str | Path, dataset: Dataset) -> None:
    """Write a dataset to the HYEB binary format (classes in id order)."""
    registry = dataset.registry
    dim = registry.dim
    parts: list[bytes] = [DATASET_MAGIC, struct.pack("<HI", FORMAT_VERSION, dim)]
    class_ids = registry.class_ids()
    parts.append(struct.pack("<I", len(class_ids)))
    for cid in class_ids:
        entry = registry.entry(cid)
        name = entry.class_name.encode("utf-8")
        parts.append(
            struct.pack(
                "<IHH",
                _check_u(cid, 32, "class_id"),
                _check_u(entry.domain_id, 16, "domain_id"),
                _check_u(len(name), 16, "class name length"),
            )
        )
        parts.append(name)
        parts.append(entry.text_embedding.values.astype("<f4").tobytes())
    parts.append(struct.pack("<Q", len(dataset.samples)))
    for s in dataset.samples:
        parts.append(struct.pack("<IB", _check_u(s.class_id, 32, "class_id"), s.split.code))
        parts.append(s.embedding.values.astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_dataset(path: str | Path) -> Dataset:
    """Read and strictly validate a HYEB dataset file."""
    buf = Path(path).read_bytes()
    cur = _Cursor(buf, str(path))
    magic = cur.take_bytes(4)
    if magic != DATASET_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {DATASET_MAGIC!r}")
    (version, dim) = cur.take("<HI")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    if dim < 1:
        raise FormatError(f"{path}: dimension must be >= 1, got {dim}")
    (n_classes,) = cur.take("<I")
    entries: dict[int, RegistryEntry] = {}
    for _ in range(n_classes):
        (cid, domain_id, name_len) = cur.take("<IHH")
        name = cur.take_bytes(name_len).decode("utf-8")
        text = cur.take_f32(dim).astype(np.float64)
        if not np.all(np.isfinite(text)):
            raise IntegrityError(f"{path}: non-finite text embedding for class {cid}")
        if cid in entries:
            raise IntegrityError(f"{path}: duplicate class id {cid} in class table")
        entries[cid] = RegistryEntry(domain_id, name, EmbeddingVector(text))
    if not entries:
        raise FormatError(f"{path}: dataset declares zero classes")
    registry = ClassRegistry(entries)
    (n_samples,) = cur.take("<Q")
    samples: list[LabeledSample] = []
    for i in range(n_samples):
        (cid, split_code) = cur.take("<IB")
        values = cur.take_f32(dim).astype(np.float64)
        if cid not in entries:
            raise IntegrityError(f"{path}: sample {i} references unknown class {cid}")
        if split_code not in (0, 1):
            raise FormatError(f"{path}: sample {i} has invalid split byte {split_code}")
        if not np.all(np.isfinite(values)):
            raise IntegrityError(f"{path}: sample {i} has non-finite values")
        samples.append(
            LabeledSample(
                EmbeddingVector(values),
                class_id=cid,
                domain_id=entries[cid].domain_id,
                split=Split.TRAIN if split_code == 0 else Split.TEST,
            )
        )
    cur.expect_end()
    return Dataset(registry, samples)


def write_snapshot(path: str | Path, store: PrototypeStore) -> None:
    """Checkpoint a prototype store to the HYPS binary format.

    Records are canonicalized to ascending class-id order; the in-memory
    ingestion order is not persisted.
    """
    if len(store) == 0:
        raise ProtocolError("cannot snapshot an empty prototype store")
    class_ids = store.class_ids()
    first = store.prototype(class_ids[0])
    d = first.d_fused
    mode = store.fusion_mode
    assert mode is not None
    parts = [
        SNAPSHOT_MAGIC,
        struct.pack("<HBII", FORMAT_VERSION, _FUSION_CODES[mode], d, len(class_ids)),
    ]
    iu = np.triu_indices(d)
    for cid in class_ids:
        proto = store.prototype(cid)
        parts.append(struct.pack("<II", _check_u(cid, 32, "class_id"), proto.sample_count))
        parts.append(proto.mu.values.astype("<f8").tobytes())
        parts.append(np.ascontiguousarray(proto.precision[iu], dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_snapshot(path: str | Path) -> PrototypeStore:
    """Load a prototype store snapshot, re-validating every precision."""
    buf = Path(path).read_bytes()
    cur = _Cursor(buf, str(path))
    magic = cur.take_bytes(4)
    if magic != SNAPSHOT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {SNAPSHOT_MAGIC!r}")
    (version, mode_code, d, n_classes) = cur.take("<HBII")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported snapshot version {version}")
    if mode_code not in _FUSION_FROM_CODE:
        raise FormatError(f"{path}: unknown fusion mode code {mode_code}")
    mode = _FUSION_FROM_CODE[mode_code]
    if d < 1 or (mode is FusionMode.CONCAT and d % 2 != 0):
        raise FormatError(f"{path}: invalid fused dimension {d} for {mode.value} fusion")
    iu = np.triu_indices(d)
    protos: dict[int, ClassPrototype] = {}
    for _ in range(n_classes):
        (cid, k) = cur.take("<II")
        if cid in protos:
            raise IntegrityError(f"{path}: duplicate class id {cid} in snapshot")
        mu = cur.take_f64(d).copy()
        tri = cur.take_f64((d * (d + 1)) // 2)
        precision = np.zeros((d, d))
        precision[iu] = tri
        precision = precision + np.triu(precision, k=1).T
        try:
            protos[cid] = ClassPrototype(
                class_id=cid,
                mu=FusedEmbedding(mu, mode),
                precision=precision,
                sample_count=int(k),
            )
        except (SingularCovarianceError, ConfigError, ProtocolError) as exc:
            raise IntegrityError(f"{path}: invalid prototype for class {cid}: {exc}") from None
    cur.expect_end()
    if not protos:
        raise FormatError(f"{path}: snapshot declares zero classes")
    return PrototypeStore(protos, sorted(protos), mode)
