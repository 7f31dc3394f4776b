"""Extraction jobs: from an object list to embedding files on disk.

Outputs per job, all in the shared wire format or plain text:

* ``<object_id>.views.emb`` - one M x d view-feature file per object;
* ``text.emb``              - num_objects x d caption features, stacked;
* ``captions.txt``          - one caption per line, object order;
* ``manifest.txt``          - written last, as the completion marker.

Object order is identical everywhere: the order of the object list file
drives the view-file listing in the manifest, the text rows, and the
caption sidecar lines.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backbones import backbone_dim
from .captioning import Captioner, TemplateCaptioner
from .errors import JobError, JobValidationError
from .format import manifest_text, write_embedding, write_text_atomic


@dataclass(frozen=True)
class ObjectViews:
    object_id: str
    image_paths: tuple[Path, ...]

    def __post_init__(self):
        if not self.object_id or any(c in self.object_id for c in ",\n\t"):
            raise JobValidationError(f"bad object id {self.object_id!r}")
        if not self.image_paths:
            raise JobValidationError(f"object {self.object_id!r} has no views")


@dataclass
class ExtractionJob:
    objects: list[ObjectViews]
    prompt_name: str
    prompt_text: str
    backbone_tag: str
    output_dir: Path
    require_captions: bool = False

    def __post_init__(self):
        if not self.objects:
            raise JobValidationError("job has no objects")
        counts = {len(obj.image_paths) for obj in self.objects}
        if len(counts) != 1:
            raise JobValidationError(
                f"all objects must share the same view count, got {sorted(counts)}"
            )
        backbone_dim(self.backbone_tag)  # validates the tag
        self.output_dir = Path(self.output_dir)

    @property
    def view_count(self) -> int:
        return len(self.objects[0].image_paths)


def parse_object_list(path: Path, image_root: Path | None = None) -> list[ObjectViews]:
    """One object per line: ``object_id<TAB>path1,path2,...``."""
    root = Path(image_root) if image_root is not None else None
    objects = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if "\t" not in line:
            raise JobValidationError(f"{path}:{lineno}: expected object_id<TAB>paths")
        object_id, _, rest = line.partition("\t")
        paths = tuple(
            (root / p if root is not None else Path(p))
            for p in rest.split(",") if p
        )
        objects.append(ObjectViews(object_id=object_id, image_paths=paths))
    if not objects:
        raise JobValidationError(f"{path}: no objects listed")
    return objects


def encode_views(job: ExtractionJob, encoder) -> list[Path]:
    """One M x d embedding file per object; returns the paths in order."""
    job.output_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for obj in job.objects:
        try:
            features = encoder.encode_images(list(obj.image_paths))
        except JobError as exc:
            raise JobError(f"object {obj.object_id!r}: {exc}") from exc
        if features.shape != (job.view_count, encoder.dim):
            raise JobError(
                f"object {obj.object_id!r}: encoder returned {features.shape}, "
                f"expected {(job.view_count, encoder.dim)}"
            )
        path = job.output_dir / f"{obj.object_id}.views.emb"
        write_embedding(features, path)
        written.append(path)
    return written


@dataclass
class CaptionResult:
    captions: list[str]
    features: np.ndarray          # num_objects x d
    empty_objects: list[str] = field(default_factory=list)


def caption_and_encode(
    job: ExtractionJob, captioner: Captioner, encoder
) -> CaptionResult:
    """Caption each object from its views, encode, stack in object order.

    A captioner failure or empty caption becomes a zero feature row (and
    is reported) unless the job requires captions, in which case it fails
    the whole job.
    """
    captions = []
    rows = []
    empty = []
    for obj in job.objects:
        try:
            caption = captioner(list(obj.image_paths), job.prompt_text)
        except JobError as exc:
            if job.require_captions:
                raise JobError(f"object {obj.object_id!r}: {exc}") from exc
            caption = ""
        if "\n" in caption:
            caption = caption.replace("\n", " ").strip()
        captions.append(caption)
        if caption:
            rows.append(np.asarray(encoder.encode_text(caption), dtype=np.float32))
        else:
            if job.require_captions:
                raise JobError(
                    f"object {obj.object_id!r}: captioner returned an empty "
                    f"caption and the job requires captions"
                )
            empty.append(obj.object_id)
            rows.append(np.zeros(encoder.dim, dtype=np.float32))
    return CaptionResult(captions=captions, features=np.vstack(rows), empty_objects=empty)


def run_extraction(
    job: ExtractionJob,
    encoder,
    captioner: Captioner | None = None,
) -> dict[str, str]:
    """Full job: view files, text features, caption sidecar, manifest last.

    Returns the manifest entries. The manifest is the completion marker:
    its presence means every other artifact was fully written.
    """
    if captioner is None:
        captioner = TemplateCaptioner()
    view_paths = encode_views(job, encoder)
    result = caption_and_encode(job, captioner, encoder)

    # captions sidecar can hold empty lines (auditable), unlike label files
    write_text_atomic(
        job.output_dir / "captions.txt",
        "".join(f"{caption}\n" for caption in result.captions),
    )
    write_embedding(result.features, job.output_dir / "text.emb")

    manifest = {
        "backbone": job.backbone_tag,
        "dim": str(encoder.dim),
        "views_per_object": str(job.view_count),
        "num_objects": str(len(job.objects)),
        "prompt_preset": job.prompt_name,
        "prompt": job.prompt_text,
        "encoder": getattr(encoder, "implementation_id", type(encoder).__name__),
        "image_mode": getattr(encoder, "image_mode", "unspecified"),
        "captioner": getattr(captioner, "implementation_id", type(captioner).__name__),
        "object_order": ",".join(obj.object_id for obj in job.objects),
        "view_files": ",".join(p.name for p in view_paths),
        "empty_captions": ",".join(result.empty_objects),
        "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    write_text_atomic(job.output_dir / "manifest.txt", manifest_text(manifest))
    return manifest
