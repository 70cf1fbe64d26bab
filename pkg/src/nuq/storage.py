"""Binary and CSV carriers for embeddings and fitted models.

Embedding files ("NUQE"): magic, version u8 = 1, flags u8 (bit 0 marks a
label block), then N, d, C as u32, N*d float32 points row-major, and N
u32 labels when flagged.  Everything is little-endian and write/read
round-trips the payload bit-for-bit.

Model files ("NUQM"): magic, version u8 = 1, kernel kind u8, bandwidth
f64, d/N/C u32, density mode u8, ridge f64 (NaN encodes the scale-aware
default), five u32 of index configuration (backend, neighbors, m,
ef_construction, ef_search), then the embedded training matrix and
labels.  Class Gaussians are refit on load, which is deterministic.

All writes go through a temp file in the target directory followed by an
atomic rename.
"""

from __future__ import annotations

import math
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import ParseError
from .kernels import KERNEL_KINDS, KernelSpec
from .knn import BACKENDS, IndexConfig, build_index
from .model import DENSITY_MODES, EmbeddingDataset, NuqModel
from .density import fit_class_gaussians

_EMB_MAGIC = b"NUQE"
_MODEL_MAGIC = b"NUQM"
_VERSION = 1


def atomic_write_bytes(path, payload: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, blob: bytes, what: str):
        self.blob = blob
        self.offset = 0
        self.what = what

    def take(self, size: int, field: str) -> bytes:
        if self.offset + size > len(self.blob):
            raise ParseError(f"truncated {self.what}: expected {field}", offset=self.offset)
        chunk = self.blob[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str, field: str):
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size, field))


def write_embeddings(dataset: EmbeddingDataset, path) -> None:
    """Write a dataset; a ``.csv`` extension selects the text fallback."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        _write_embeddings_csv(dataset, path)
        return
    labeled = dataset.labels is not None
    header = struct.pack(
        "<4sBBIII",
        _EMB_MAGIC, _VERSION, 1 if labeled else 0,
        dataset.n, dataset.dim, dataset.num_classes,
    )
    parts = [header, dataset.points.astype("<f4").tobytes(order="C")]
    if labeled:
        parts.append(dataset.labels.astype("<u4").tobytes())
    atomic_write_bytes(path, b"".join(parts))


def _write_embeddings_csv(dataset: EmbeddingDataset, path: Path) -> None:
    lines = []
    for i in range(dataset.n):
        cells = [f"{float(v):.9g}" for v in dataset.points[i]]
        if dataset.labels is not None:
            cells.append(str(int(dataset.labels[i])))
        lines.append(",".join(cells))
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())


def read_embeddings(path, label_col: str | int | None = None) -> EmbeddingDataset:
    """Read a dataset; ``label_col`` applies to the CSV fallback only.

    ``label_col`` may be None (no labels), "last", or a column index.
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _read_embeddings_csv(path, label_col)
    reader = _Reader(path.read_bytes(), "embedding file")
    magic = reader.take(4, "magic")
    if magic != _EMB_MAGIC:
        raise ParseError(f"bad magic {magic!r}, expected {_EMB_MAGIC!r}", offset=0)
    (version,) = reader.unpack("<B", "version")
    if version != _VERSION:
        raise ParseError(f"unsupported version {version}", offset=4)
    (flags,) = reader.unpack("<B", "flags")
    labeled = bool(flags & 1)
    n, dim, num_classes = reader.unpack("<III", "shape header")
    if n < 1 or dim < 1:
        raise ParseError(f"degenerate shape n={n}, d={dim}", offset=6)
    points_off = reader.offset
    pts = np.frombuffer(reader.take(4 * n * dim, "point block"), dtype="<f4").reshape(n, dim)
    bad = ~np.isfinite(pts)
    if bad.any():
        first = int(np.flatnonzero(bad.ravel())[0])
        raise ParseError("non-finite point value", offset=points_off + 4 * first)
    labels = None
    if labeled:
        labels_off = reader.offset
        labels = np.frombuffer(reader.take(4 * n, "label block"), dtype="<u4").astype(np.int64)
        if num_classes < 1:
            raise ParseError("labeled file must carry a positive class count", offset=10)
        out_of_range = labels >= num_classes
        if out_of_range.any():
            first = int(np.argmax(out_of_range))
            raise ParseError(
                f"label {int(labels[first])} >= class count {num_classes}",
                offset=labels_off + 4 * first,
            )
    if reader.offset != len(reader.blob):
        raise ParseError("trailing bytes after payload", offset=reader.offset)
    return EmbeddingDataset(points=pts.copy(), labels=labels,
                            num_classes=num_classes if labeled else 0)


def _read_embeddings_csv(path: Path, label_col) -> EmbeddingDataset:
    try:
        table = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except ValueError as exc:
        raise ParseError(f"malformed CSV {path.name}: {exc}") from exc
    if table.size == 0:
        raise ParseError(f"empty CSV {path.name}")
    if label_col is None:
        return EmbeddingDataset(points=table.astype(np.float32), labels=None, num_classes=0)
    col = table.shape[1] - 1 if label_col == "last" else int(label_col)
    if not (0 <= col < table.shape[1]):
        raise ParseError(f"label column {col} outside the {table.shape[1]}-column table")
    raw = table[:, col]
    if np.any(raw != np.floor(raw)) or np.any(raw < 0):
        raise ParseError("label column must hold nonnegative integers")
    labels = raw.astype(np.int64)
    pts = np.delete(table, col, axis=1)
    if pts.shape[1] < 1:
        raise ParseError("CSV has no feature columns besides the label column")
    return EmbeddingDataset(points=pts.astype(np.float32), labels=labels,
                            num_classes=int(labels.max()) + 1)


_KIND_CODE = {kind: i for i, kind in enumerate(KERNEL_KINDS)}
_MODE_CODE = {mode: i for i, mode in enumerate(DENSITY_MODES)}
_BACKEND_CODE = {backend: i for i, backend in enumerate(BACKENDS)}


def save_model(model: NuqModel, path) -> None:
    ridge = model.ridge if model.ridge is not None else math.nan
    header = struct.pack(
        "<4sBBdIIIBd5I",
        _MODEL_MAGIC, _VERSION,
        _KIND_CODE[model.kernel.kind], model.kernel.bandwidth,
        model.dim, model.n, model.num_classes,
        _MODE_CODE[model.density_mode], ridge,
        _BACKEND_CODE[model.index_cfg.backend], model.index_cfg.neighbors,
        model.index_cfg.hnsw_m, model.index_cfg.hnsw_ef_construction,
        model.index_cfg.hnsw_ef_search,
    )
    payload = b"".join([
        header,
        model.dataset.points.astype("<f4").tobytes(order="C"),
        model.dataset.labels.astype("<u4").tobytes(),
    ])
    atomic_write_bytes(path, payload)


def _decode(table: dict, code: int, what: str, offset: int) -> str:
    for name, value in table.items():
        if value == code:
            return name
    raise ParseError(f"unknown {what} code {code}", offset=offset)


def load_model(path) -> NuqModel:
    """Rebuild a model from file; the index and any class Gaussians are refit."""
    reader = _Reader(Path(path).read_bytes(), "model file")
    magic = reader.take(4, "magic")
    if magic != _MODEL_MAGIC:
        raise ParseError(f"bad magic {magic!r}, expected {_MODEL_MAGIC!r}", offset=0)
    (version,) = reader.unpack("<B", "version")
    if version != _VERSION:
        raise ParseError(f"unsupported version {version}", offset=4)
    kind_off = reader.offset
    (kind_code,) = reader.unpack("<B", "kernel kind")
    (bandwidth,) = reader.unpack("<d", "bandwidth")
    dim, n, num_classes = reader.unpack("<III", "shape header")
    mode_off = reader.offset
    (mode_code,) = reader.unpack("<B", "density mode")
    (ridge,) = reader.unpack("<d", "ridge")
    cfg_off = reader.offset
    backend_code, neighbors, m, efc, efs = reader.unpack("<5I", "index config")
    pts_off = reader.offset
    pts = np.frombuffer(reader.take(4 * n * dim, "training matrix"), dtype="<f4").reshape(n, dim)
    if not np.all(np.isfinite(pts)):
        raise ParseError("non-finite training value", offset=pts_off)
    labels = np.frombuffer(reader.take(4 * n, "label block"), dtype="<u4").astype(np.int64)
    if reader.offset != len(reader.blob):
        raise ParseError("trailing bytes after payload", offset=reader.offset)
    kind = _decode(_KIND_CODE, kind_code, "kernel kind", kind_off)
    mode = _decode(_MODE_CODE, mode_code, "density mode", mode_off)
    backend = _decode(_BACKEND_CODE, backend_code, "index backend", cfg_off)
    if labels.size and labels.max() >= max(num_classes, 1):
        raise ParseError("label outside the stored class count", offset=pts_off + 4 * n * dim)
    dataset = EmbeddingDataset(points=pts.copy(), labels=labels, num_classes=num_classes)
    kernel = KernelSpec(kind, bandwidth, dim)
    index_cfg = IndexConfig(neighbors=neighbors, backend=backend, hnsw_m=m,
                            hnsw_ef_construction=efc, hnsw_ef_search=efs)
    ridge_value = None if math.isnan(ridge) else ridge
    index = build_index(dataset.points, index_cfg)
    gaussians = None
    if mode == "gmm":
        gaussians = fit_class_gaussians(dataset, ridge=ridge_value)
    return NuqModel(dataset, kernel, index, index_cfg, mode, gaussians, ridge_value)
