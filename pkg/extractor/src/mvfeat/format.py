"""Writers for the shared embedding/manifest file formats.

The wire format is the consumer's contract (see this package's README):

    bytes 0-7    ASCII "TEDAEMB" + version byte 0x01
    bytes 8-11   u32 little-endian row count
    bytes 12-15  u32 little-endian column count
    then         rows*dim float32 little-endian, row-major

This module implements the format from that statement independently of
the consumer library, so the contract tests (which parse our output with
the consumer's reader) actually cross two implementations.

All writes are atomic: a temp file in the destination directory is
renamed into place, so a crashed job never leaves half-written files.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import JobValidationError

MAGIC = b"TEDAEMB\x01"
_HEADER = struct.Struct("<8sII")


def embedding_bytes(values: np.ndarray) -> bytes:
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise JobValidationError(f"embedding matrix must be RxC with R,C >= 1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        r, c = np.argwhere(~np.isfinite(arr))[0]
        raise JobValidationError(f"non-finite value at row {r}, col {c}; refusing to write")
    header = _HEADER.pack(MAGIC, arr.shape[0], arr.shape[1])
    return header + np.ascontiguousarray(arr, dtype="<f4").tobytes()


def write_atomic(path: Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_embedding(values: np.ndarray, path: Path) -> None:
    write_atomic(path, embedding_bytes(values))


def write_text_atomic(path: Path, text: str) -> None:
    write_atomic(path, text.encode("utf-8"))


def manifest_text(entries: dict[str, str]) -> str:
    for key, value in entries.items():
        if not key or not key.isascii() or "=" in key:
            raise JobValidationError(f"bad manifest key {key!r}")
        if "\n" in key or "\n" in value:
            raise JobValidationError(f"manifest entry {key!r} contains a newline")
    return "".join(f"{k}={v}\n" for k, v in entries.items())
