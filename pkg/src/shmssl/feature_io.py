"""Read/write `.ierfh` feature files.

Layout (little-endian): magic (6 bytes) | version (1) | flags (1, bit 0 =
labels present) | count (u32) | dim (u32) | rows. Each row is channel (i32),
hour (i32), label (i32, only when flagged), then dim float32 values.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .reduction import FEATURE_DIM, FeatureVector

MAGIC = b"IERFHF"
VERSION = 1


def write_features(path, features: list[FeatureVector], labels=None) -> None:
    if labels is not None and len(labels) != len(features):
        raise FormatError(f"{len(labels)} labels for {len(features)} features")
    has_labels = labels is not None
    parts = [MAGIC, struct.pack("<BB", VERSION, 1 if has_labels else 0),
             struct.pack("<II", len(features), FEATURE_DIM)]
    for i, fv in enumerate(features):
        parts.append(struct.pack("<ii", int(fv.channel_id), int(fv.hour_index)))
        if has_labels:
            parts.append(struct.pack("<i", int(labels[i])))
        parts.append(fv.values.astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_features(path) -> tuple[list[FeatureVector], np.ndarray | None]:
    """Return the feature vectors and, when present, their labels."""
    blob = Path(path).read_bytes()
    pos = 0

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(blob):
            raise FormatError(f"truncated feature file while reading {what}", offset=pos)
        out = blob[pos:pos + n]
        pos += n
        return out

    if take(len(MAGIC), "magic") != MAGIC:
        raise FormatError("bad magic bytes; not a feature file", offset=0)
    version, flags = struct.unpack("<BB", take(2, "header"))
    if version != VERSION:
        raise FormatError(f"unsupported feature file version {version}", offset=pos - 2)
    count, dim = struct.unpack("<II", take(8, "counts"))
    if dim != FEATURE_DIM:
        raise FormatError(f"feature dimension {dim} != {FEATURE_DIM}", offset=pos - 4)
    has_labels = bool(flags & 1)
    features: list[FeatureVector] = []
    labels = np.empty(count, dtype=np.int64) if has_labels else None
    for i in range(count):
        channel, hour = struct.unpack("<ii", take(8, f"row {i} metadata"))
        if has_labels:
            (labels[i],) = struct.unpack("<i", take(4, f"row {i} label"))
        values = np.frombuffer(take(4 * dim, f"row {i} values"), dtype="<f4").astype(np.float64)
        features.append(FeatureVector(values, channel, hour))
    if pos != len(blob):
        raise FormatError("trailing bytes after final row", offset=pos)
    return features, labels


def feature_matrix(features: list[FeatureVector]) -> np.ndarray:
    return np.stack([fv.values for fv in features]) if features else np.empty((0, FEATURE_DIM))
