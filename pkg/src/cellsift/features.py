"""Feature-vector interchange: binary/CSV serialization and a baseline extractor.

Binary layout (little-endian throughout)::

    magic   4 bytes  b"AFV1"
    dim     uint32
    count   uint64
    record  id_len:uint16, id:utf-8 bytes, label_flag:uint8,
            label:int32 (only when flag == 1), values:dim x float64
    crc     uint32 CRC-32 of all preceding bytes

The trailing checksum lets the reader reject any corrupted file instead of
silently returning perturbed values.

The baseline extractor produces a fixed 86-dimensional descriptor per crop:
three 16-bin RGB histograms (48 dims, each L1-normalized), 16-bin hue and
saturation histograms (32 dims, L1-normalized), then per-channel mean and
standard deviation scaled to [0, 1] (6 dims). It is deterministic and
invariant to pixel permutation, standing in for a deep embedding at desk
scale; color-distinct classes come out linearly separable.
"""

from __future__ import annotations

import csv
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .raster import rgb_to_hsv
from .validation import check_raster

MAGIC = b"AFV1"
BASELINE_DIM = 86


class FeatureFormatError(ValueError):
    """Malformed feature file (bad magic, truncation, duplicate ids, ...)."""


@dataclass
class FeatureVector:
    id: str
    values: np.ndarray  # (dim,) float64
    label: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValueError(f"values must be 1-D, got shape {self.values.shape}")
        if not np.isfinite(self.values).all():
            raise ValueError(f"feature {self.id!r} contains NaN or infinite values")

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass
class FeatureSet:
    dim: int
    vectors: list[FeatureVector] = field(default_factory=list)
    source: str = "external"

    def __post_init__(self):
        seen = set()
        for i, vec in enumerate(self.vectors):
            if vec.dim != self.dim:
                raise ValueError(
                    f"record {i} ({vec.id!r}) has dim {vec.dim}, expected {self.dim}")
            if vec.id in seen:
                raise ValueError(f"duplicate id {vec.id!r} at record {i}")
            seen.add(vec.id)

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def ids(self) -> list[str]:
        return [v.id for v in self.vectors]

    @property
    def labels(self) -> list[int | None]:
        return [v.label for v in self.vectors]

    def matrix(self) -> np.ndarray:
        """Stack all vectors into an (n, dim) float64 matrix."""
        if not self.vectors:
            return np.empty((0, self.dim), dtype=np.float64)
        return np.stack([v.values for v in self.vectors])


def write_features(fset: FeatureSet, path: str | Path) -> None:
    """Serialize a feature set; values round-trip exactly at 64-bit precision."""
    parts = [MAGIC, struct.pack("<IQ", fset.dim, len(fset.vectors))]
    for vec in fset.vectors:
        id_bytes = vec.id.encode("utf-8")
        if len(id_bytes) > 0xFFFF:
            raise ValueError(f"id too long: {vec.id[:32]!r}...")
        parts.append(struct.pack("<H", len(id_bytes)))
        parts.append(id_bytes)
        if vec.label is None:
            parts.append(struct.pack("<B", 0))
        else:
            parts.append(struct.pack("<Bi", 1, int(vec.label)))
        parts.append(vec.values.astype("<f8").tobytes())
    payload = b"".join(parts)
    Path(path).write_bytes(payload + struct.pack("<I", zlib.crc32(payload)))


def read_features(path: str | Path) -> FeatureSet:
    """Read a binary feature file, validating the checksum then each record."""
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != MAGIC:
        raise FeatureFormatError(f"{path}: bad magic, not a feature file")
    if len(data) < 20:
        raise FeatureFormatError(f"{path}: truncated header")
    (stored_crc,) = struct.unpack_from("<I", data, len(data) - 4)
    data = data[:-4]
    if zlib.crc32(data) != stored_crc:
        raise FeatureFormatError(f"{path}: checksum mismatch, file is corrupted")
    dim, count = struct.unpack_from("<IQ", data, 4)
    off = 16
    vectors: list[FeatureVector] = []
    seen: set[str] = set()
    for rec in range(count):
        try:
            (id_len,) = struct.unpack_from("<H", data, off)
            off += 2
            if len(data) < off + id_len:
                raise struct.error("id")
            sample_id = data[off : off + id_len].decode("utf-8", errors="replace")
            off += id_len
            (flag,) = struct.unpack_from("<B", data, off)
            off += 1
            label = None
            if flag == 1:
                (label,) = struct.unpack_from("<i", data, off)
                off += 4
            elif flag != 0:
                raise FeatureFormatError(f"{path}: record {rec}: bad label flag {flag}")
            end = off + dim * 8
            if end > len(data):
                raise struct.error("values")
            values = np.frombuffer(data, dtype="<f8", count=dim, offset=off).copy()
            off = end
        except struct.error as exc:
            raise FeatureFormatError(f"{path}: record {rec}: truncated ({exc})") from None
        if not np.isfinite(values).all():
            raise FeatureFormatError(f"{path}: record {rec} ({sample_id!r}): non-finite values")
        if sample_id in seen:
            raise FeatureFormatError(f"{path}: record {rec}: duplicate id {sample_id!r}")
        seen.add(sample_id)
        vectors.append(FeatureVector(id=sample_id, values=values, label=label))
    if off != len(data):
        raise FeatureFormatError(f"{path}: {len(data) - off} trailing bytes after record {count - 1}")
    return FeatureSet(dim=dim, vectors=vectors, source="external")


def read_features_csv(path: str | Path) -> FeatureSet:
    """CSV import for hand-made fixtures: header ``id,label,v0,v1,...``.

    An empty label field means unlabeled.
    """
    path = Path(path)
    vectors: list[FeatureVector] = []
    dim = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 3 or header[0] != "id" or header[1] != "label":
            raise FeatureFormatError(f"{path}: expected header 'id,label,v0,...'")
        dim = len(header) - 2
        for rec, row in enumerate(reader):
            if not row:
                continue
            if len(row) != dim + 2:
                raise FeatureFormatError(
                    f"{path}: record {rec}: expected {dim + 2} fields, got {len(row)}")
            label = int(row[1]) if row[1].strip() else None
            try:
                values = np.array([float(x) for x in row[2:]], dtype=np.float64)
            except ValueError as exc:
                raise FeatureFormatError(f"{path}: record {rec}: {exc}") from None
            vectors.append(FeatureVector(id=row[0], values=values, label=label))
    try:
        return FeatureSet(dim=dim, vectors=vectors, source="external")
    except ValueError as exc:
        raise FeatureFormatError(f"{path}: {exc}") from None


def load_feature_file(path: str | Path) -> FeatureSet:
    """Load either format, sniffing binary magic first."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return read_features(path)
    return read_features_csv(path)


def _l1_hist(values: np.ndarray, bins: int, vrange: tuple[float, float]) -> np.ndarray:
    hist, _ = np.histogram(values, bins=bins, range=vrange)
    total = hist.sum()
    if total == 0:
        return np.zeros(bins, dtype=np.float64)
    return hist / float(total)


def baseline_extract(crop: np.ndarray, sample_id: str = "", label: int | None = None) -> FeatureVector:
    """Histogram-and-moment descriptor for one crop (see module docstring)."""
    crop = check_raster(crop, "crop")
    if crop.shape[0] < 8 or crop.shape[1] < 8:
        raise ValueError(f"crop too small for feature extraction: {crop.shape[:2]}, need >= 8x8")

    parts = [_l1_hist(crop[..., c].ravel(), 16, (0.0, 256.0)) for c in range(3)]
    hsv = rgb_to_hsv(crop)
    parts.append(_l1_hist(hsv[..., 0].ravel(), 16, (0.0, 180.0)))
    parts.append(_l1_hist(hsv[..., 1].ravel(), 16, (0.0, 256.0)))

    # integer accumulation keeps the moments exactly permutation-invariant
    flat = crop.reshape(-1, 3).astype(np.int64)
    n = flat.shape[0]
    mean = flat.sum(axis=0) / n
    var = np.maximum(np.square(flat).sum(axis=0) / n - mean**2, 0.0)
    moments = np.concatenate([mean / 255.0, np.sqrt(var) / 255.0])
    values = np.concatenate(parts + [moments])
    assert values.shape[0] == BASELINE_DIM
    return FeatureVector(id=sample_id, values=values, label=label)


def extract_feature_set(
    crops: list[tuple[str, np.ndarray]],
    labels: dict[str, int] | None = None,
) -> FeatureSet:
    """Run the baseline extractor over (id, crop) pairs."""
    labels = labels or {}
    vectors = [baseline_extract(crop, sample_id=cid, label=labels.get(cid)) for cid, crop in crops]
    return FeatureSet(dim=BASELINE_DIM, vectors=vectors, source="baseline")
