"""Dependency-free stand-in detector.

Finds the bounding box of whatever differs from the border background color
and reports a single person there, with a standing-pose keypoint layout
spread over that box. A uniform image yields no detections. Deliberately
naive: the point is a deterministic, schema-correct detector that needs no
model download, for tests and for exercising the pipeline plumbing.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

import numpy as np

from .schema import detection_record

# Minimum per-channel difference from the background that counts as content.
CONTRAST_FLOOR = 16
DETECTION_CONFIDENCE = 0.9
KEYPOINT_SCORE = 0.8

# (x, y) of each canonical keypoint inside a unit person box, top-left
# origin: nose, eyes, ears, shoulders, elbows, wrists, hips, knees, ankles,
# left side before right.
_UNIT_POSE: Tuple[Tuple[float, float], ...] = (
    (0.50, 0.06),
    (0.46, 0.04),
    (0.54, 0.04),
    (0.42, 0.05),
    (0.58, 0.05),
    (0.35, 0.18),
    (0.65, 0.18),
    (0.30, 0.35),
    (0.70, 0.35),
    (0.28, 0.50),
    (0.72, 0.50),
    (0.40, 0.55),
    (0.60, 0.55),
    (0.42, 0.75),
    (0.58, 0.75),
    (0.44, 0.95),
    (0.56, 0.95),
)


def content_bbox(image: np.ndarray) -> Optional[Tuple[float, float, float, float]]:
    """Bounding box (x, y, w, h) of pixels differing from the border
    background, or None when the image is uniform."""
    pixels = np.asarray(image, dtype=np.int16)
    if pixels.ndim == 2:
        pixels = pixels[:, :, np.newaxis]
    channels = pixels.shape[2]
    border = np.concatenate(
        [
            pixels[0].reshape(-1, channels),
            pixels[-1].reshape(-1, channels),
            pixels[:, 0].reshape(-1, channels),
            pixels[:, -1].reshape(-1, channels),
        ]
    )
    background = np.median(border, axis=0)
    mask = np.abs(pixels - background).max(axis=2) >= CONTRAST_FLOOR
    if not mask.any():
        return None
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    x, y = float(cols[0]), float(rows[0])
    return (x, y, float(cols[-1] - cols[0] + 1), float(rows[-1] - rows[0] + 1))


def extract(image: np.ndarray, model_size: str = "n") -> List[Dict]:
    """Detector entry point with the same shape as the model backend.

    ``model_size`` is accepted for interface parity and ignored.
    """
    del model_size
    box = content_bbox(image)
    if box is None:
        return []
    x, y, w, h = box
    keypoints = [(x + u * w, y + v * h, KEYPOINT_SCORE) for u, v in _UNIT_POSE]
    return [detection_record(box, DETECTION_CONFIDENCE, keypoints)]
