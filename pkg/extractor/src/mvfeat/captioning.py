"""Caption generation for multi-view objects.

The two preset prompts are fixed byte-for-byte; a free-form prompt is
allowed and gets logged to the manifest. A captioner is any callable
taking (image paths, prompt) and returning one sentence; decoding must be
deterministic so repeated runs emit identical caption sidecars.

The default TemplateCaptioner is a deterministic offline stand-in: the
caption is a pure function of the view images' bytes (identical images
yield identical captions, matching pinned greedy decoding of a real
captioner). Wiring a multimodal language model in its place only requires
satisfying the same callable signature.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Protocol

from .errors import JobError

PROMPT_PRESETS = {
    "q1": (
        "There are images of an object from different angles. "
        "Describe this object in one sentence."
    ),
    "q2": (
        "There are images of an object from different angles. "
        "Describe this object's shape information in one sentence."
    ),
}


def resolve_prompt(preset: str, custom: str | None = None) -> tuple[str, str]:
    """Returns (prompt_name, prompt_text); free strings are named 'custom'."""
    if preset in PROMPT_PRESETS:
        return preset, PROMPT_PRESETS[preset]
    if preset == "custom":
        if not custom:
            raise JobError("prompt preset 'custom' needs a prompt string")
        if "\n" in custom:
            raise JobError("custom prompt must be a single line")
        return "custom", custom
    raise JobError(f"unknown prompt preset {preset!r}; choose q1, q2, or custom")


class Captioner(Protocol):
    def __call__(self, image_paths: list[Path], prompt: str) -> str: ...


class TemplateCaptioner:
    """Offline deterministic captioner; caption depends only on the images."""

    implementation_id = "template-blake2b-v1"

    def __call__(self, image_paths: list[Path], prompt: str) -> str:
        digest = hashlib.blake2b(digest_size=6)
        for path in image_paths:
            try:
                digest.update(Path(path).read_bytes())
            except OSError as exc:
                raise JobError(f"unreadable image {path}: {exc}") from exc
        signature = digest.hexdigest()
        return (
            f"An object with visual signature {signature}, "
            f"captured from {len(image_paths)} angles."
        )
