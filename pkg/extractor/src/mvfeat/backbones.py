"""Encoder backends behind one interface.

A backbone tag declares the embedding dimensionality of the checkpoint it
names; the encoder implementation behind it is pluggable:

* ``clip`` - the production path: open_clip vision/text towers (imports
  torch lazily; install the ``[clip]`` extra). Inference settings are
  pinned (eval mode, no grad) so repeated runs produce identical files.
* ``hashed`` - a fully offline, deterministic stand-in used by the
  contract tests and for plumbing dry-runs. Each image (or caption) is
  reduced to its BLAKE2b-64 digest, which seeds a SplitMix64 stream that
  emits ``dim`` Box-Muller normal deviates. Output depends only on file
  bytes, so identical inputs give identical files on any machine. It is
  not a semantic encoder and is labeled as such in every manifest.

Raw encoder outputs are written unnormalized; all normalization policy
belongs to the consumer's fusion step so ablations can rerun without
re-encoding.
"""

from __future__ import annotations

import hashlib
import math
from pathlib import Path

import numpy as np

from .errors import JobError, JobValidationError

# tag -> embedding dimension of the named checkpoint
BACKBONES = {
    "clip-vit-l-14": 768,
    "openclip-vit-l-14": 768,
    "clip-vit-b-32": 512,
    "openclip-vit-b-32": 512,
}

ENCODER_IMPLEMENTATIONS = ("clip", "hashed")

_MASK64 = (1 << 64) - 1


def backbone_dim(tag: str) -> int:
    try:
        return BACKBONES[tag]
    except KeyError:
        raise JobValidationError(
            f"unknown backbone tag {tag!r}; known: {sorted(BACKBONES)}"
        ) from None


class HashedEncoder:
    """Deterministic offline encoder; see the module docstring."""

    implementation_id = "hashed-blake2b-splitmix64-v1"
    image_mode = "raw-bytes"  # hashes file bytes; never decodes pixels

    def __init__(self, tag: str):
        self.tag = tag
        self.dim = backbone_dim(tag)

    @staticmethod
    def _stream(seed: int, count: int) -> np.ndarray:
        state = seed & _MASK64
        out = np.empty(count, dtype=np.float64)

        def next_u64() -> int:
            nonlocal state
            state = (state + 0x9E3779B97F4A7C15) & _MASK64
            z = state
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
            return z ^ (z >> 31)

        for i in range(count):
            u1 = ((next_u64() >> 11) + 1) / 9007199254740992.0
            u2 = (next_u64() >> 11) / 9007199254740992.0
            out[i] = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        return out

    def _encode_bytes(self, payload: bytes) -> np.ndarray:
        seed = int.from_bytes(
            hashlib.blake2b(payload, digest_size=8).digest(), "little"
        )
        return self._stream(seed, self.dim).astype(np.float32)

    def encode_images(self, paths: list[Path]) -> np.ndarray:
        rows = []
        for path in paths:
            try:
                payload = Path(path).read_bytes()
            except OSError as exc:
                raise JobError(f"unreadable image {path}: {exc}") from exc
            rows.append(self._encode_bytes(b"image\x00" + payload))
        return np.vstack(rows)

    def encode_text(self, text: str) -> np.ndarray:
        return self._encode_bytes(b"text\x00" + text.encode("utf-8"))


class ClipEncoder:
    """open_clip-backed encoder; requires the [clip] extra and a checkpoint.

    Kept behind lazy imports so the package works without torch installed.
    """

    implementation_id = "open-clip-v1"
    image_mode = "rgb"  # inputs converted to 3-channel RGB before preprocess

    _CHECKPOINTS = {
        "clip-vit-l-14": ("ViT-L-14", "openai"),
        "openclip-vit-l-14": ("ViT-L-14", "laion2b_s32b_b82k"),
        "clip-vit-b-32": ("ViT-B-32", "openai"),
        "openclip-vit-b-32": ("ViT-B-32", "laion2b_s34b_b79k"),
    }

    def __init__(self, tag: str):
        self.tag = tag
        self.dim = backbone_dim(tag)
        try:
            import open_clip
            import torch
            from PIL import Image
        except ImportError as exc:
            raise JobError(
                "the clip encoder needs torch, open-clip-torch, and pillow "
                "(pip install 'mvfeat[clip]'); use --encoder hashed for an "
                f"offline dry-run ({exc})"
            ) from exc
        self._torch = torch
        self._image_cls = Image
        arch, pretrained = self._CHECKPOINTS[tag]
        model, _, preprocess = open_clip.create_model_and_transforms(
            arch, pretrained=pretrained
        )
        self._tokenizer = open_clip.get_tokenizer(arch)
        self._model = model.eval()
        self._preprocess = preprocess

    def encode_images(self, paths: list[Path]) -> np.ndarray:
        torch = self._torch
        tensors = []
        for path in paths:
            try:
                image = self._image_cls.open(path).convert("RGB")
            except OSError as exc:
                raise JobError(f"unreadable image {path}: {exc}") from exc
            tensors.append(self._preprocess(image))
        with torch.no_grad():
            features = self._model.encode_image(torch.stack(tensors))
        return features.cpu().numpy().astype(np.float32)

    def encode_text(self, text: str) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            features = self._model.encode_text(self._tokenizer([text]))
        return features.cpu().numpy().astype(np.float32)[0]


def load_encoder(tag: str, implementation: str = "clip"):
    if implementation == "clip":
        return ClipEncoder(tag)
    if implementation == "hashed":
        return HashedEncoder(tag)
    raise JobValidationError(
        f"unknown encoder implementation {implementation!r}; "
        f"choose from {ENCODER_IMPLEMENTATIONS}"
    )
