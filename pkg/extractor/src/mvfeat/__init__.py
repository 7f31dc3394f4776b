"""Multi-view image and caption feature extraction.

Encodes pre-rendered view images and generated captions into the shared
embedding file format consumed by the alignment/retrieval library.
"""

from .backbones import BACKBONES, ClipEncoder, HashedEncoder, backbone_dim, load_encoder
from .captioning import PROMPT_PRESETS, Captioner, TemplateCaptioner, resolve_prompt
from .errors import JobError, JobValidationError
from .jobs import (
    CaptionResult,
    ExtractionJob,
    ObjectViews,
    caption_and_encode,
    encode_views,
    parse_object_list,
    run_extraction,
)

__version__ = "0.1.0"

__all__ = [
    "BACKBONES",
    "CaptionResult",
    "Captioner",
    "ClipEncoder",
    "ExtractionJob",
    "HashedEncoder",
    "JobError",
    "JobValidationError",
    "ObjectViews",
    "PROMPT_PRESETS",
    "TemplateCaptioner",
    "backbone_dim",
    "caption_and_encode",
    "encode_views",
    "load_encoder",
    "parse_object_list",
    "resolve_prompt",
    "run_extraction",
]
