"""pose-adapter: images in, keypoint JSON lines out.

    pose-adapter extract --input frame.png --output poses.jsonl \\
        --model-size n --conf 0.25 [--backend yolo|synthetic]

--input may also name a directory; every image in it (sorted) feeds the
same output file. Exit codes: 0 success (including a clean zero-person
run), 2 bad usage, 3 pose model unavailable, 4 unreadable input,
1 anything unexpected.
"""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from .errors import AdapterError, ModelUnavailable, UnreadableImage
from .extract import BACKENDS, MODEL_SIZES, extract_poses

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_MODEL = 3
EXIT_INPUT = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pose-adapter",
        description="extract person keypoints from images into a JSON Lines file",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("extract", help="write keypoint JSON lines for an image or directory")
    p.add_argument("--input", required=True, help="image file or directory of images")
    p.add_argument("--output", required=True, help="destination .jsonl file")
    p.add_argument("--model-size", choices=MODEL_SIZES, default="n")
    p.add_argument("--conf", type=float, default=0.25, help="confidence threshold")
    p.add_argument(
        "--backend",
        choices=BACKENDS,
        default="yolo",
        help="'yolo' runs the pretrained model, 'synthetic' a dependency-free stand-in",
    )
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        count = extract_poses(
            args.input,
            args.output,
            model_size=args.model_size,
            conf=args.conf,
            backend=args.backend,
        )
    except ModelUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except UnreadableImage as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AdapterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # surface anything else with a stable exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED
    print(f"{count} detection(s) -> {args.output}", file=sys.stderr)
    return EXIT_OK
