"""End-to-end fall detection: candidates in, one JSON alert report out.

A *candidate* is one hypothesis about where the person-carrying plane sits
(its distance ``h`` from the reference view) together with the pose
detections found under that hypothesis.  Detections either come
pre-extracted from keypoint files — the fully self-contained path — or are
produced by warping a raw image through each candidate's transfer map and
handing the result to an external pose-extraction command.

The candidate whose best detection is most confident wins; every person in
it is then classified by the posture rules, the trained network, or both,
and the outcome is serialized as a single-line JSON report whose field
names are a stable contract for downstream consumers.
"""

from __future__ import annotations

import json
import subprocess
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import (
    AdapterUnavailable,
    EmptyCandidates,
    InvalidConfig,
)
from .falldet import (
    DEFAULT_IMAGE_SIZE,
    SCORE_THRESHOLD,
    MlpWeights,
    PoseDetection,
    load_detections,
    mlp_forward,
    rules_fall,
)
from .projective import CameraModel, Homography, sample_homographies
from .raster import load_image, save_image, warp_image

METHODS = ("rules", "mlp", "both")
DEFAULT_MLP_THRESHOLD = 0.5

# Height, in meters, separating a chest-level human viewpoint from the
# near-floor robot viewpoint it stands in for.
DEFAULT_POV_LIFT = 1.35


@dataclass(frozen=True)
class CandidateResult:
    """Detections obtained under one plane-distance hypothesis."""

    h: float
    detections: Tuple[PoseDetection, ...]
    homography: Optional[Homography] = None
    best_confidence: float = field(init=False)

    def __post_init__(self):
        h = float(self.h)
        if not np.isfinite(h) or h <= 0.0:
            raise ValueError(f"candidate distance must be positive and finite, got {h!r}")
        dets = tuple(self.detections)
        for d in dets:
            if not isinstance(d, PoseDetection):
                raise TypeError("detections must be PoseDetection instances")
        best = max((d.confidence for d in dets), default=0.0)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "detections", dets)
        object.__setattr__(self, "best_confidence", float(best))


def select_best_candidate(results) -> CandidateResult:
    """Pick the candidate holding the highest-confidence detection.

    Ties on confidence go to the smallest plane distance, so the outcome
    is independent of the order candidates were evaluated in.

    Raises:
        EmptyCandidates: if no candidates were supplied.
    """
    pool = list(results)
    if not pool:
        raise EmptyCandidates("no candidates to select from")
    return max(pool, key=lambda c: (c.best_confidence, -c.h))


@dataclass(frozen=True)
class PersonVerdict:
    """Classification outcome for one detected person."""

    bbox: Tuple[float, float, float, float]
    rules_fall: bool
    mlp_p_fall: Optional[float]
    method: str


@dataclass(frozen=True)
class FallReport:
    timestamp: str
    source: str
    candidate_h: Optional[float]
    persons: Tuple[PersonVerdict, ...]
    alarm: bool
    no_person: bool


def default_timestamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def report_to_json(report: FallReport) -> str:
    """Single-line JSON for a report; field names are a stable contract."""
    doc = {
        "timestamp": report.timestamp,
        "source": report.source,
        "candidate_h": report.candidate_h,
        "persons": [
            {
                "bbox": [float(v) for v in p.bbox],
                "rules_fall": bool(p.rules_fall),
                "mlp_p_fall": None if p.mlp_p_fall is None else float(p.mlp_p_fall),
                "method": p.method,
            }
            for p in report.persons
        ],
        "alarm": report.alarm,
        "no_person": report.no_person,
    }
    return json.dumps(doc, separators=(",", ":"))


def classify_detections(
    detections: Sequence[PoseDetection],
    method: str = "rules",
    weights: Optional[MlpWeights] = None,
    mlp_threshold: float = DEFAULT_MLP_THRESHOLD,
    image_size: Tuple[int, int] = DEFAULT_IMAGE_SIZE,
    score_threshold: float = SCORE_THRESHOLD,
):
    """Run the configured classifier(s) over each detection.

    The posture rules are always evaluated (they are cheap and make every
    report self-explanatory); the network only runs when the method asks
    for it.  A person counts as fallen when the *configured* method says
    so: the rules bit for "rules", the thresholded probability for "mlp",
    and either one for "both".

    Returns:
        (verdicts, any_fall) where verdicts is a list of PersonVerdict.
    """
    if method not in METHODS:
        raise InvalidConfig(f"method must be one of {METHODS}, got {method!r}")
    if method in ("mlp", "both") and weights is None:
        raise InvalidConfig(f"method {method!r} needs trained network weights")
    if not 0.0 < mlp_threshold < 1.0:
        raise InvalidConfig(f"mlp_threshold must lie in (0, 1), got {mlp_threshold!r}")
    verdicts = []
    any_fall = False
    for det in detections:
        rules_bit = bool(rules_fall(det, score_threshold=score_threshold))
        p_fall = None
        if method in ("mlp", "both"):
            p_fall, _ = mlp_forward(
                weights, det, image_size=image_size, score_threshold=score_threshold
            )
            p_fall = float(p_fall)
        if method == "rules":
            fell = rules_bit
        elif method == "mlp":
            fell = p_fall >= mlp_threshold
        else:
            fell = rules_bit or p_fall >= mlp_threshold
        any_fall = any_fall or fell
        verdicts.append(
            PersonVerdict(bbox=det.bbox, rules_fall=rules_bit, mlp_p_fall=p_fall, method=method)
        )
    return verdicts, any_fall


def candidates_from_files(candidate_files) -> list:
    """Load (plane_distance, keypoint_file) pairs into CandidateResults."""
    results = []
    for h, path in candidate_files:
        results.append(CandidateResult(h=float(h), detections=tuple(load_detections(path))))
    return results


def candidates_from_image(
    image_path,
    homographies,
    adapter_cmd: Sequence[str],
    workdir,
) -> list:
    """Warp an image per candidate and extract poses with an external command.

    ``homographies`` is a list of (plane_distance, Homography) pairs; the
    adapter command is invoked as ``cmd --input <warped.png> --output
    <poses.jsonl>`` once per candidate.

    Raises:
        AdapterUnavailable: if the command cannot be run or exits nonzero.
    """
    image = load_image(image_path)
    workdir = Path(workdir)
    results = []
    for i, (h, hom) in enumerate(homographies):
        warped_path = workdir / f"candidate_{i:02d}.png"
        poses_path = workdir / f"candidate_{i:02d}.jsonl"
        save_image(warped_path, warp_image(image, hom))
        cmd = [*adapter_cmd, "--input", str(warped_path), "--output", str(poses_path)]
        try:
            proc = subprocess.run(cmd, capture_output=True, text=True)
        except (FileNotFoundError, PermissionError) as exc:
            raise AdapterUnavailable(f"cannot run pose extractor {cmd[0]!r}: {exc}") from None
        if proc.returncode != 0:
            detail = proc.stderr.strip().splitlines()[-1:] or ["(no stderr)"]
            raise AdapterUnavailable(
                f"pose extractor exited with status {proc.returncode}: {detail[0]}"
            )
        dets = load_detections(poses_path)
        results.append(CandidateResult(h=float(h), detections=tuple(dets), homography=hom))
    return results


def pov_homographies(
    intrinsics,
    min_distance: float,
    max_distance: float,
    count: int = 8,
    lift: float = DEFAULT_POV_LIFT,
):
    """Transfer maps lifting a floor-level view to a raised viewpoint.

    Models a second camera ``lift`` meters straight above the first with
    the same orientation (the image y axis points down, so "up" is -y in
    camera coordinates) and a person plane facing the camera along its
    optical axis, sampled at evenly spaced distances.

    Returns:
        List of (distance, Homography) pairs, ascending in distance.
    """
    low = CameraModel(intrinsics=intrinsics)
    high = CameraModel(intrinsics=intrinsics, translation=np.array([0.0, float(lift), 0.0]))
    return sample_homographies(
        low, high, np.array([0.0, 0.0, 1.0]), min_distance, max_distance, count
    )


def run_pipeline(
    candidate_files=None,
    image=None,
    homographies=None,
    adapter_cmd: Optional[Sequence[str]] = None,
    method: str = "rules",
    weights: Optional[MlpWeights] = None,
    mlp_threshold: float = DEFAULT_MLP_THRESHOLD,
    image_size: Tuple[int, int] = DEFAULT_IMAGE_SIZE,
    score_threshold: float = SCORE_THRESHOLD,
    source: Optional[str] = None,
    timestamp: Optional[str] = None,
    workdir=None,
) -> FallReport:
    """Evaluate candidates, pick the best, classify everyone in it.

    Exactly one input mode must be used:

    * ``candidate_files``: (plane_distance, keypoint_file) pairs, fully
      self-contained.
    * ``image`` + ``homographies`` + ``adapter_cmd``: the image is warped
      once per candidate and poses are extracted by the external command.

    ``timestamp`` is injectable so identical inputs produce byte-identical
    reports; when omitted the current UTC time is stamped.

    Raises:
        InvalidConfig: missing/contradictory inputs or classifier setup.
        AdapterUnavailable: image input without a usable extractor command.
        EmptyCandidates: an empty candidate list was supplied.
    """
    if method not in METHODS:
        raise InvalidConfig(f"method must be one of {METHODS}, got {method!r}")
    if method in ("mlp", "both") and weights is None:
        raise InvalidConfig(f"method {method!r} needs trained network weights")
    if candidate_files is not None and image is not None:
        raise InvalidConfig("give either keypoint files or an image, not both")

    if candidate_files is not None:
        candidate_files = list(candidate_files)
        results = candidates_from_files(candidate_files)
        default_source = Path(candidate_files[0][1]).name if candidate_files else "keypoints"
    elif image is not None:
        if not homographies:
            raise InvalidConfig("image input needs at least one candidate homography")
        if adapter_cmd is None:
            raise AdapterUnavailable(
                "image input needs a pose-extractor command; "
                "run from keypoint files or configure an adapter"
            )
        if workdir is None:
            with tempfile.TemporaryDirectory(prefix="fallbot_") as tmp:
                results = candidates_from_image(image, homographies, adapter_cmd, tmp)
        else:
            results = candidates_from_image(image, homographies, adapter_cmd, workdir)
        default_source = Path(image).name
    else:
        raise InvalidConfig("no candidate input: give keypoint files or an image")

    best = select_best_candidate(results)
    verdicts, any_fall = classify_detections(
        best.detections,
        method=method,
        weights=weights,
        mlp_threshold=mlp_threshold,
        image_size=image_size,
        score_threshold=score_threshold,
    )
    no_person = all(not c.detections for c in results)
    return FallReport(
        timestamp=timestamp if timestamp is not None else default_timestamp(),
        source=source if source is not None else default_source,
        candidate_h=best.h,
        persons=tuple(verdicts),
        alarm=any_fall,
        no_person=no_person,
    )


def emit_report(report: FallReport, sink=None) -> Optional[Path]:
    """Write a report to stdout, a file, or an alert spool directory.

    * ``sink=None``: print the single-line JSON to stdout.
    * existing directory: the spool case — an alarm report is written to
      ``fall_<timestamp>.json`` inside it and quiet reports write nothing,
      mirroring an alerting channel that only speaks up on a fall.
    * anything else: treated as a file path and always written.

    Re-emitting the same report overwrites the same bytes.

    Returns:
        The path written, or None for stdout / a quiet spool.
    """
    line = report_to_json(report)
    if sink is None:
        print(line)
        return None
    sink = Path(sink)
    if sink.is_dir():
        if not report.alarm:
            return None
        target = sink / f"fall_{report.timestamp}.json"
    else:
        target = sink
    target.write_text(line + "\n", encoding="utf-8")
    return target
