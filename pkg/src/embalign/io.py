"""Bit-exact serialization of embedding matrices, labels, and manifests.

Embedding file layout (all integers and floats little-endian):

    bytes 0-7    magic: ASCII "TEDAEMB" followed by version byte 0x01
    bytes 8-11   unsigned 32-bit row count
    bytes 12-15  unsigned 32-bit column count
    bytes 16-    rows*dim IEEE-754 single-precision values, row-major

Values are stored single-precision; downstream arithmetic promotes to
double and only re-truncates when writing back out. Labels live in a
sidecar text file (one label per line) so target sets can be reused with
or without ground truth. Manifests are flat "key=value" text files.
"""

from __future__ import annotations

import struct
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, TruncationError, ValidationError, WriteError

MAGIC = b"TEDAEMB\x01"
HEADER_SIZE = 16
_HEADER = struct.Struct("<8sII")


@contextmanager
def _as_stream(source, mode: str):
    """Accept an open stream or a path; only close what we opened."""
    if isinstance(source, (str, Path)):
        with open(source, mode) as handle:
            yield handle
    else:
        yield source


def validate_matrix(values: np.ndarray) -> np.ndarray:
    """Check the embedding-matrix invariants; returns a float32 view/copy."""
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise ValidationError(f"embedding matrix must be 2-D, got shape {arr.shape}")
    rows, dim = arr.shape
    if rows < 1 or dim < 1:
        raise ValidationError(f"embedding matrix needs rows >= 1 and dim >= 1, got {rows}x{dim}")
    arr = arr.astype(np.float32, copy=False)
    if not np.all(np.isfinite(arr)):
        r, c = np.argwhere(~np.isfinite(arr))[0]
        raise ValidationError(f"non-finite value at row {r}, col {c}")
    return arr


def write_matrix(values: np.ndarray, destination) -> None:
    """Serialize a matrix; emits exactly 16 + 4*rows*dim bytes.

    The byte stream is a pure function of the (single-precision) values.
    A sink failure is reported as WriteError carrying the byte count that
    made it out before the failure.
    """
    arr = validate_matrix(values)
    rows, dim = arr.shape
    header = _HEADER.pack(MAGIC, rows, dim)
    payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    with _as_stream(destination, "wb") as sink:
        written = 0
        for chunk in (header, payload):
            try:
                sink.write(chunk)
            except OSError as exc:
                raise WriteError(written, str(exc)) from exc
            written += len(chunk)


def read_matrix(source) -> np.ndarray:
    """Parse an embedding file back into a float32 array.

    Raises FormatError on a bad magic/version prefix, TruncationError when
    the stream is shorter than its header promises, and ValidationError
    when the payload contains NaN or infinity (named by row/col).
    """
    with _as_stream(source, "rb") as stream:
        header = stream.read(HEADER_SIZE)
        prefix = header[: len(MAGIC)]
        if prefix != MAGIC[: len(prefix)]:
            raise FormatError(f"bad magic {prefix!r}, expected {MAGIC!r}")
        if len(header) < HEADER_SIZE:
            raise TruncationError(HEADER_SIZE, len(header), what="header")
        _, rows, dim = _HEADER.unpack(header)
        if rows < 1 or dim < 1:
            raise ValidationError(f"header declares {rows}x{dim}; both must be >= 1")
        expected = 4 * rows * dim
        payload = stream.read(expected)
        if len(payload) < expected:
            raise TruncationError(expected, len(payload))
    arr = np.frombuffer(payload, dtype="<f4").reshape(rows, dim)
    arr = arr.astype(np.float32)  # native-order writable copy, bit-identical values
    if not np.all(np.isfinite(arr)):
        r, c = np.argwhere(~np.isfinite(arr))[0]
        raise ValidationError(f"non-finite value at row {r}, col {c}")
    return arr


def read_labels(source, expected_rows: int) -> list[str]:
    """Read exactly expected_rows labels, one per line.

    The trailing newline is optional. Empty lines and count mismatches are
    validation errors (with the line number / both counts in the message).
    """
    if expected_rows < 1:
        raise ValidationError(f"expected_rows must be >= 1, got {expected_rows}")
    with _as_stream(source, "r") as stream:
        text = stream.read()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) != expected_rows:
        raise ValidationError(
            f"label count mismatch: file has {len(lines)} lines, expected {expected_rows}"
        )
    for i, line in enumerate(lines, start=1):
        if line == "":
            raise ValidationError(f"empty label at line {i}")
    return lines


def write_labels(labels, destination) -> None:
    """Write one label per line with a trailing newline."""
    labels = list(labels)
    for i, label in enumerate(labels, start=1):
        if not label:
            raise ValidationError(f"empty label at position {i}")
        if "\n" in label:
            raise ValidationError(f"label at position {i} contains a newline")
    with _as_stream(destination, "w") as sink:
        sink.write("".join(f"{label}\n" for label in labels))


def write_manifest(entries: dict[str, str], destination) -> None:
    """Write "key=value" lines; keys must be unique ASCII without '='."""
    for key in entries:
        if not key or not key.isascii():
            raise ValidationError(f"manifest key {key!r} must be non-empty ASCII")
        if "=" in key:
            raise ValidationError(f"manifest key {key!r} must not contain '='")
        if "\n" in key or "\n" in str(entries[key]):
            raise ValidationError(f"manifest entry {key!r} must not contain newlines")
    with _as_stream(destination, "w") as sink:
        sink.write("".join(f"{key}={entries[key]}\n" for key in entries))


def read_manifest(source) -> dict[str, str]:
    with _as_stream(source, "r") as stream:
        text = stream.read()
    entries: dict[str, str] = {}
    for i, line in enumerate(text.splitlines(), start=1):
        if "=" not in line:
            raise ValidationError(f"manifest line {i} has no '=': {line!r}")
        key, _, value = line.partition("=")
        if key in entries:
            raise ValidationError(f"duplicate manifest key {key!r} at line {i}")
        entries[key] = value
    return entries


@dataclass
class LabeledSet:
    """An embedding matrix with one category label per row."""

    embeddings: np.ndarray
    labels: list[str]

    def __post_init__(self):
        self.embeddings = validate_matrix(self.embeddings)
        self.labels = list(self.labels)
        if len(self.labels) != self.embeddings.shape[0]:
            raise ValidationError(
                f"{len(self.labels)} labels for {self.embeddings.shape[0]} rows"
            )
        for i, label in enumerate(self.labels):
            if not label:
                raise ValidationError(f"empty label at row {i}")
            if "\n" in label:
                raise ValidationError(f"label at row {i} contains a newline")

    @property
    def rows(self) -> int:
        return self.embeddings.shape[0]

    def save(self, matrix_path, labels_path) -> None:
        write_matrix(self.embeddings, matrix_path)
        write_labels(self.labels, labels_path)

    @classmethod
    def load(cls, matrix_path, labels_path) -> "LabeledSet":
        embeddings = read_matrix(matrix_path)
        labels = read_labels(labels_path, embeddings.shape[0])
        return cls(embeddings, labels)
