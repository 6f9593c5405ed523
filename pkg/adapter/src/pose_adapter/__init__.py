"""Image-to-keypoint-file extraction feeding the fall-detection pipeline.

The only coupling to the robot toolkit is the JSON Lines detection schema
(see `pose_adapter.schema`); this package never imports the toolkit. It is
happiest being invoked by `fallbot pipeline run --adapter ...`, which
pre-warps the frames — geometry stays on the toolkit's side, person
detection on this one.
"""

from .errors import AdapterError, InvalidRequest, ModelUnavailable, UnreadableImage
from .extract import BACKENDS, IMAGE_SUFFIXES, MODEL_SIZES, extract_poses, load_image
from .schema import COCO_KEYPOINT_ORDER, detection_record, write_detections

__version__ = "0.1.0"

__all__ = [
    "AdapterError",
    "BACKENDS",
    "COCO_KEYPOINT_ORDER",
    "IMAGE_SUFFIXES",
    "InvalidRequest",
    "MODEL_SIZES",
    "ModelUnavailable",
    "UnreadableImage",
    "detection_record",
    "extract_poses",
    "load_image",
    "write_detections",
]
