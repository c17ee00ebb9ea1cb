"""Binary checkpoint serialization for model bundles (`.ckpt`).

Layout (all integers little-endian):

    magic (8 bytes) | version (1) | method tag (u8 len + utf-8) | seed (u64)
    | entry count (u32)
    | per entry: name (u16 len + utf-8), ndim (u8), dims (u32 each)
    | payloads: raw little-endian float64 in entry order

Entries cover every parameter tensor and every batchnorm running statistic,
so a load reproduces the saved bundle bit-exactly.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError
from .models import BUNDLE_NETS, ModelBundle, build

MAGIC = b"SHMSSLCK"
VERSION = 1


def _entries(bundle: ModelBundle) -> list[tuple[str, np.ndarray]]:
    out: list[tuple[str, np.ndarray]] = []
    for net_name, net in bundle.nets.items():
        for pname, p in net.parameters():
            out.append((f"{net_name}.{pname}", p.data))
        for sname, arr in net.state_arrays():
            out.append((f"{net_name}.{sname}", arr))
    return out


def save_checkpoint(bundle: ModelBundle, path) -> None:
    entries = _entries(bundle)
    method_bytes = bundle.method.encode("utf-8")
    parts = [MAGIC, struct.pack("<B", VERSION),
             struct.pack("<B", len(method_bytes)), method_bytes,
             struct.pack("<Q", bundle.seed & (2**64 - 1)),
             struct.pack("<I", len(entries))]
    for name, arr in entries:
        name_bytes = name.encode("utf-8")
        parts.append(struct.pack("<H", len(name_bytes)))
        parts.append(name_bytes)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
    for _, arr in entries:
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.blob):
            raise FormatError(f"truncated checkpoint while reading {what}", offset=self.pos)
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size, what))


def load_checkpoint(path) -> ModelBundle:
    reader = _Reader(Path(path).read_bytes())
    if reader.take(len(MAGIC), "magic") != MAGIC:
        raise FormatError("bad magic bytes; not a checkpoint file", offset=0)
    (version,) = reader.unpack("<B", "version")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=reader.pos - 1)
    (tag_len,) = reader.unpack("<B", "method tag length")
    method = reader.take(tag_len, "method tag").decode("utf-8")
    (seed,) = reader.unpack("<Q", "seed")
    (count,) = reader.unpack("<I", "entry count")
    manifest: list[tuple[str, tuple[int, ...]]] = []
    for _ in range(count):
        (name_len,) = reader.unpack("<H", "entry name length")
        name = reader.take(name_len, "entry name").decode("utf-8")
        (ndim,) = reader.unpack("<B", "entry rank")
        shape = reader.unpack(f"<{ndim}I", "entry shape") if ndim else ()
        manifest.append((name, tuple(shape)))
    arrays: dict[str, np.ndarray] = {}
    for name, shape in manifest:
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        raw = reader.take(8 * n, f"payload for {name}")
        arrays[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
    if reader.pos != len(reader.blob):
        raise FormatError("trailing bytes after final payload", offset=reader.pos)
    return _rebuild(method, seed, arrays)


def _rebuild(method: str, seed: int, arrays: dict[str, np.ndarray]) -> ModelBundle:
    if method not in BUNDLE_NETS:
        raise FormatError(f"checkpoint carries unknown method tag {method!r}")
    k = None
    if "head" in BUNDLE_NETS[method]:
        head_key = "head.2.linear.weight"
        if head_key not in arrays:
            raise FormatError(f"classifier checkpoint missing {head_key!r}")
        k = arrays[head_key].shape[0]
    try:
        bundle = build(method, k=k, seed=seed)
    except ConfigError as exc:
        raise FormatError(f"cannot rebuild bundle: {exc}") from exc
    expected = {name for name, _ in _entries(bundle)}
    if expected != set(arrays):
        missing = sorted(expected - set(arrays))
        extra = sorted(set(arrays) - expected)
        raise FormatError(f"entry names do not match architecture "
                          f"(missing {missing[:3]}, unexpected {extra[:3]})")
    for net_name, net in bundle.nets.items():
        for pname, p in net.parameters():
            arr = arrays[f"{net_name}.{pname}"]
            if arr.shape != p.data.shape:
                raise FormatError(
                    f"shape {arr.shape} for {net_name}.{pname} does not match {p.data.shape}"
                )
            p.data[...] = arr
        for i, layer in enumerate(net.layers):
            for key in layer.state:
                arr = arrays[f"{net_name}.{i}.{layer.spec.kind}.{key}"]
                if arr.shape != layer.state[key].shape:
                    raise FormatError(f"shape mismatch for running stat {net_name}.{i}.{key}")
                layer.state[key] = arr.copy()
    return bundle
