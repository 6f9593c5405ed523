"""Pretrained pose-model backend.

The model dependency is imported lazily so the package installs and its
other backend runs on machines without it; only actually invoking this
backend needs the model stack (and, first time, its weight download).
"""

from __future__ import annotations

from typing import Dict, List

from .errors import ModelUnavailable
from .schema import COCO_KEYPOINT_ORDER, detection_record


def extract(image, model_size: str = "n") -> List[Dict]:
    """Run a pretrained pose model over one RGB array."""
    try:
        from ultralytics import YOLO
    except ImportError as exc:
        raise ModelUnavailable(
            "the 'yolo' backend needs the ultralytics package; install it "
            "(pip install ultralytics) or run with --backend synthetic"
        ) from exc
    try:
        model = YOLO(f"yolov8{model_size}-pose.pt")
        results = model(image, verbose=False)
    except Exception as exc:  # model load/inference failures vary by install
        raise ModelUnavailable(f"pose model failed to run: {exc}") from exc

    records: List[Dict] = []
    for result in results:
        if result.boxes is None or result.keypoints is None:
            continue
        boxes = result.boxes.xywh.tolist()  # center x, center y, w, h
        confidences = result.boxes.conf.tolist()
        points = result.keypoints.xy.tolist()
        scores = result.keypoints.conf
        if scores is None:
            scores = [[1.0] * len(COCO_KEYPOINT_ORDER) for _ in points]
        else:
            scores = scores.tolist()
        for (cx, cy, w, h), conf, xy, ss in zip(boxes, confidences, points, scores):
            keypoints = [(x, y, s) for (x, y), s in zip(xy, ss)]
            records.append(
                detection_record((cx - w / 2.0, cy - h / 2.0, w, h), conf, keypoints)
            )
    return records
