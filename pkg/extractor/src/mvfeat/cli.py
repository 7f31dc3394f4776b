"""Command-line entry point for extraction jobs."""

from __future__ import annotations

import argparse
import sys

from .backbones import BACKBONES, ENCODER_IMPLEMENTATIONS, load_encoder
from .captioning import resolve_prompt
from .errors import JobError, JobValidationError
from .jobs import ExtractionJob, parse_object_list, run_extraction


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvfeat-extract",
        description="Encode multi-view images and captions into embedding files.",
    )
    parser.add_argument("--objects", required=True, metavar="FILE",
                        help="object list: one 'object_id<TAB>path1,path2,...' per line")
    parser.add_argument("--image-root", dest="image_root", default=None,
                        help="prefix for relative image paths in the object list")
    parser.add_argument("--backbone", default="openclip-vit-l-14",
                        choices=sorted(BACKBONES),
                        help="checkpoint tag; fixes the embedding dim (default: openclip-vit-l-14)")
    parser.add_argument("--encoder", default="clip", choices=ENCODER_IMPLEMENTATIONS,
                        help="encoder implementation (default: clip; 'hashed' is the "
                             "offline deterministic stand-in)")
    parser.add_argument("--prompt", default="q1", choices=("q1", "q2", "custom"),
                        help="caption prompt preset (default: q1)")
    parser.add_argument("--custom-prompt", dest="custom_prompt", default=None,
                        help="prompt text when --prompt custom")
    parser.add_argument("--require-captions", dest="require_captions",
                        action="store_true",
                        help="fail the job on an empty caption instead of a zero row")
    parser.add_argument("--output-dir", dest="output_dir", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        prompt_name, prompt_text = resolve_prompt(args.prompt, args.custom_prompt)
        job = ExtractionJob(
            objects=parse_object_list(args.objects, args.image_root),
            prompt_name=prompt_name,
            prompt_text=prompt_text,
            backbone_tag=args.backbone,
            output_dir=args.output_dir,
            require_captions=args.require_captions,
        )
        encoder = load_encoder(args.backbone, args.encoder)
        manifest = run_extraction(job, encoder)
    except JobValidationError as exc:
        print(f"validation-error: {exc}", file=sys.stderr)
        return 2
    except JobError as exc:
        print(f"job-error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"io-error: {exc}", file=sys.stderr)
        return 3
    print(
        f"extracted {manifest['num_objects']} objects x "
        f"{manifest['views_per_object']} views (dim {manifest['dim']}) "
        f"to {args.output_dir}"
    )
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
