"""Named-array container used for checkpoints and processed datasets.

Layout (all integers little-endian)::

    magic      7 bytes   b"STATTN1"
    count      u64       number of entries
    entry * count:
        name_len  u32
        name      name_len bytes, UTF-8
        rank      u32
        dims      rank * u64
        payload   prod(dims) * f64, row-major

Entries are written in the order given, so the same mapping always produces
the same bytes.
"""

from __future__ import annotations

import hashlib
import os
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"STATTN1"


class ContainerError(ValueError):
    pass


def dumps(arrays: Mapping[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<Q", len(arrays))]
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype=np.float64)
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<I", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(np.ascontiguousarray(arr).astype("<f8").tobytes())
    return b"".join(parts)


def loads(blob: bytes) -> dict[str, np.ndarray]:
    if blob[: len(MAGIC)] != MAGIC:
        raise ContainerError("bad magic: not a STATTN1 container")
    pos = len(MAGIC)

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(blob):
            raise ContainerError("truncated container")
        chunk = blob[pos : pos + n]
        pos += n
        return chunk

    (count,) = struct.unpack("<Q", take(8))
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        dims = struct.unpack(f"<{rank}Q", take(8 * rank))
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        payload = np.frombuffer(take(8 * size), dtype="<f8")
        if name in out:
            raise ContainerError(f"duplicate entry {name!r}")
        out[name] = payload.astype(np.float64).reshape(dims)
    if pos != len(blob):
        raise ContainerError(f"{len(blob) - pos} trailing bytes after last entry")
    return out


def save(path: str | os.PathLike, arrays: Mapping[str, np.ndarray]) -> str:
    """Write atomically and return the sha256 of the written bytes."""
    path = Path(path)
    blob = dumps(arrays)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)
    return hashlib.sha256(blob).hexdigest()


def load(path: str | os.PathLike) -> dict[str, np.ndarray]:
    return loads(Path(path).read_bytes())


def file_sha256(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
