#!/usr/bin/env python3
"""Walk through the embedding file format: headers, payloads, sidecars.

Everything downstream (fusion, alignment, evaluation) trades in these
files, so this demo starts at the bytes.
"""
import io

import numpy as np

from embalign import read_labels, read_matrix, write_labels, write_manifest, write_matrix

print("=" * 70)
print("1. A tiny matrix and its exact byte layout")
print("=" * 70)

matrix = np.array([[1.5, -2.0, 0.25], [10.0, 0.0, -0.5]], dtype=np.float32)
buf = io.BytesIO()
write_matrix(matrix, buf)
raw = buf.getvalue()

print(f"matrix:\n{matrix}")
print(f"\nserialized size: {len(raw)} bytes (16 header + 4*rows*dim payload)")
print(f"magic + version : {raw[:8]!r}")
print(f"rows (u32 LE)   : {raw[8:12].hex()} -> {int.from_bytes(raw[8:12], 'little')}")
print(f"dim  (u32 LE)   : {raw[12:16].hex()} -> {int.from_bytes(raw[12:16], 'little')}")
print(f"payload         : {raw[16:].hex()}")

buf.seek(0)
back = read_matrix(buf)
print(f"\nround-trip equal bit for bit: {np.array_equal(back, matrix)}")

print()
print("=" * 70)
print("2. Single precision on disk, double precision in flight")
print("=" * 70)

value = 0.1  # no exact float32 representation
buf = io.BytesIO()
write_matrix(np.array([[value]]), buf)
buf.seek(0)
stored = read_matrix(buf)[0, 0]
print(f"wrote float64 {value!r}")
print(f"read  float32 {stored!r} (= np.float32(0.1): {stored == np.float32(value)})")

print()
print("=" * 70)
print("3. Labels and manifests are plain text sidecars")
print("=" * 70)

labels = ["cup", "lamp", "chair"]
text = io.StringIO()
write_labels(labels, text)
print(f"label file for {labels}:")
print(text.getvalue(), end="")
text.seek(0)
print(f"parsed back: {read_labels(text, 3)}")

manifest = io.StringIO()
write_manifest({"dataset": "demo", "views_per_object": "24", "lambda": "0.2"}, manifest)
print("\nmanifest file:")
print(manifest.getvalue(), end="")

print()
print("=" * 70)
print("4. Malformed streams fail loudly, with positions")
print("=" * 70)

for label, stream in [
    ("wrong magic", b"XXXXXXX\x01" + b"\x00" * 12),
    ("truncated payload", raw[:20]),
]:
    try:
        read_matrix(io.BytesIO(stream))
    except Exception as exc:
        print(f"{label:>18}: {type(exc).__name__}: {exc}")
