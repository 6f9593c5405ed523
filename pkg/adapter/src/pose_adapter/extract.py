"""Turn images into keypoint files the fall-detection pipeline can read."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import synthetic, yolo
from .errors import InvalidRequest, UnreadableImage
from .schema import write_detections

MODEL_SIZES = ("n", "s", "m", "l", "x")
BACKENDS = ("yolo", "synthetic")
IMAGE_SUFFIXES = (".png", ".pgm", ".ppm", ".jpg", ".jpeg", ".bmp")


def load_image(path) -> np.ndarray:
    """Read an image file as an RGB uint8 array of shape (H, W, 3)."""
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except (OSError, UnidentifiedImageError) as exc:
        raise UnreadableImage(f"cannot read image: {path}") from exc


def _image_paths(input_path: Path) -> List[Path]:
    if input_path.is_dir():
        found = sorted(
            p
            for p in input_path.iterdir()
            if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
        )
        if not found:
            raise UnreadableImage(f"no image files in directory: {input_path}")
        return found
    return [input_path]


def extract_poses(
    input_path,
    output_path,
    model_size: str = "n",
    conf: float = 0.25,
    backend: str = "yolo",
) -> int:
    """Run the chosen backend over one image (or every image in a directory,
    sorted by name) and write the detections as JSON lines.

    Returns the number of detections written. A clean run over people-free
    images produces an empty (zero-line) file, which the pipeline accepts as
    "nobody seen".
    """
    if model_size not in MODEL_SIZES:
        raise InvalidRequest(f"model size must be one of {'/'.join(MODEL_SIZES)}")
    if backend not in BACKENDS:
        raise InvalidRequest(f"unknown backend: {backend!r}")
    if not 0.0 <= conf <= 1.0:
        raise InvalidRequest("confidence threshold must be within [0, 1]")

    runner = yolo.extract if backend == "yolo" else synthetic.extract
    records: List[Dict] = []
    for path in _image_paths(Path(input_path)):
        image = load_image(path)
        for detection in runner(image, model_size=model_size):
            if detection["confidence"] >= conf:
                records.append(detection)

    write_detections(output_path, records)
    return len(records)
