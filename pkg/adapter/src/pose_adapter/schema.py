"""The keypoint-file schema shared with the fall-detection toolkit.

This is the whole coupling surface between the two packages: one JSON
object per line, and exactly these fields::

    {"bbox": [x, y, w, h], "confidence": 0.9, "keypoints": [[x, y, score], ...]}

with 17 keypoints in the canonical body order below. Anything this module
emits must load through the toolkit's detection reader unchanged.
"""

from __future__ import annotations

import json
from typing import Dict, List, Sequence, Tuple

COCO_KEYPOINT_ORDER: Tuple[str, ...] = (
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
)


def detection_record(
    bbox: Sequence[float],
    confidence: float,
    keypoints: Sequence[Sequence[float]],
) -> Dict:
    """Build one schema-valid detection record, ready for ``json.dumps``.

    ``bbox`` is top-left x, y then width, height; ``keypoints`` is 17
    (x, y, score) triples in COCO_KEYPOINT_ORDER.
    """
    points = [[float(x), float(y), float(score)] for x, y, score in keypoints]
    if len(points) != len(COCO_KEYPOINT_ORDER):
        raise ValueError(
            f"expected {len(COCO_KEYPOINT_ORDER)} keypoints, got {len(points)}"
        )
    x, y, w, h = (float(v) for v in bbox)
    return {"bbox": [x, y, w, h], "confidence": float(confidence), "keypoints": points}


def write_detections(path, records: List[Dict]) -> None:
    """Write records as JSON lines; zero records gives a valid empty file."""
    with open(path, "w", encoding="ascii") as fh:
        for record in records:
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")
