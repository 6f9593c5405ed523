"""Person-down decision logic: geometric posture rules and a tiny MLP.

Two independent decision routes over 2-D pose keypoints:

* :func:`rules_fall` -- a closed-form predicate on shoulder/hip/ankle
  heights and the detection-box aspect ratio.  No training, no state.
* a fully connected 34-20-20-2 network over normalised keypoint
  coordinates (:func:`mlp_train`, :func:`forward`).

Image coordinates follow the raster convention: y grows downward, so
"higher in the scene" means a *smaller* y value.  Both routes are
invariant to where the person stands in the frame; the network
additionally normalises by the image size so the same weights work
across resolutions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    EmptyClass,
    MalformedDetection,
    NonfiniteLoss,
    ParseError,
    ShapeMismatch,
)

# Keypoint slots, in the 17-point ordering used by common pose estimators.
KEYPOINT_NAMES = (
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
KEYPOINT_INDEX = {name: i for i, name in enumerate(KEYPOINT_NAMES)}
NUM_KEYPOINTS = len(KEYPOINT_NAMES)

#: Keypoints scoring below this are treated as unobserved.
SCORE_THRESHOLD = 0.3


class Keypoint(NamedTuple):
    """One named body landmark with its detection confidence."""

    name: str
    x: float
    y: float
    score: float

#: Default frame size used to normalise coordinates for the network.
DEFAULT_IMAGE_SIZE = (640, 480)

#: Network shape: 17 keypoints x 2 coords in, fall/not-fall out.
LAYER_SIZES = (34, 20, 20, 2)

#: Output class index whose probability means "person is down".
FALL_CLASS = 0

_SHOULDERS = (KEYPOINT_INDEX["left_shoulder"], KEYPOINT_INDEX["right_shoulder"])
_HIPS = (KEYPOINT_INDEX["left_hip"], KEYPOINT_INDEX["right_hip"])
_ANKLES = (KEYPOINT_INDEX["left_ankle"], KEYPOINT_INDEX["right_ankle"])


@dataclass(frozen=True, eq=False)
class PoseDetection:
    """One detected person: a box, overall confidence, and 17 keypoints.

    ``bbox`` is ``(x, y, w, h)`` in pixels with ``(x, y)`` the top-left
    corner.  ``keypoints`` is a (17, 2) array in canonical order and
    ``scores`` the matching per-keypoint confidences.  ``label`` is an
    optional ground-truth tag: 1 = fallen, 0 = not fallen, ``None`` =
    unlabelled.
    """

    bbox: Tuple[float, float, float, float]
    keypoints: np.ndarray
    scores: np.ndarray
    confidence: float = 1.0
    label: Optional[int] = None

    def __post_init__(self):
        bbox = tuple(float(v) for v in self.bbox)
        if len(bbox) != 4 or not all(math.isfinite(v) for v in bbox):
            raise MalformedDetection(f"bbox must be 4 finite numbers, got {self.bbox!r}")
        if bbox[2] <= 0 or bbox[3] <= 0:
            raise MalformedDetection(f"bbox must have positive size, got {bbox!r}")
        kp = np.asarray(self.keypoints, dtype=float)
        sc = np.asarray(self.scores, dtype=float)
        if kp.shape != (NUM_KEYPOINTS, 2):
            raise MalformedDetection(f"keypoints must be ({NUM_KEYPOINTS}, 2), got {kp.shape}")
        if sc.shape != (NUM_KEYPOINTS,):
            raise MalformedDetection(f"scores must be ({NUM_KEYPOINTS},), got {sc.shape}")
        if not np.all(np.isfinite(kp)):
            raise MalformedDetection("keypoints contain non-finite values")
        if not np.all(np.isfinite(sc)) or np.any(sc < 0) or np.any(sc > 1):
            raise MalformedDetection("scores must lie in [0, 1]")
        conf = float(self.confidence)
        if not (math.isfinite(conf) and 0.0 <= conf <= 1.0):
            raise MalformedDetection(f"confidence must lie in [0, 1], got {self.confidence!r}")
        if self.label not in (None, 0, 1):
            raise MalformedDetection(f"label must be 0, 1 or None, got {self.label!r}")
        kp.setflags(write=False)
        sc.setflags(write=False)
        object.__setattr__(self, "bbox", bbox)
        object.__setattr__(self, "keypoints", kp)
        object.__setattr__(self, "scores", sc)
        object.__setattr__(self, "confidence", conf)

    def keypoint(self, name: str) -> Keypoint:
        i = KEYPOINT_INDEX[name]
        return Keypoint(name, float(self.keypoints[i, 0]), float(self.keypoints[i, 1]), float(self.scores[i]))


def save_detections(path, detections: Sequence[PoseDetection]) -> None:
    """Write detections as JSON lines, one person per line.

    Each line is ``{"bbox":[x,y,w,h],"confidence":c,"keypoints":
    [[x,y,score] x 17]}`` plus ``"label"`` when one is attached.
    """
    lines = []
    for det in detections:
        triples = np.column_stack([det.keypoints, det.scores]).tolist()
        record = {
            "bbox": list(det.bbox),
            "confidence": det.confidence,
            "keypoints": triples,
        }
        if det.label is not None:
            record["label"] = det.label
        lines.append(json.dumps(record, separators=(",", ":")))
    Path(path).write_text("".join(line + "\n" for line in lines))


def load_detections(path) -> list:
    """Read a JSON-lines detection file written by :func:`save_detections`.

    Blank lines are skipped.  An empty file is a valid "nobody in frame"
    result.  A missing ``confidence`` defaults to 1.0; any malformed
    line raises :class:`ParseError` naming the offending line number.
    """
    detections = []
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(record, dict):
            raise ParseError(f"{path}: line {lineno}: expected a JSON object")
        missing = {"bbox", "keypoints"} - set(record)
        if missing:
            raise ParseError(f"{path}: line {lineno}: missing keys {sorted(missing)}")
        try:
            triples = np.asarray(record["keypoints"], dtype=float)
            if triples.ndim != 2 or triples.shape[1] != 3:
                raise MalformedDetection(
                    f"keypoints must be [x, y, score] triples, got shape {triples.shape}"
                )
            detections.append(
                PoseDetection(
                    bbox=tuple(record["bbox"]),
                    keypoints=triples[:, :2],
                    scores=triples[:, 2],
                    confidence=record.get("confidence", 1.0),
                    label=record.get("label"),
                )
            )
        except (MalformedDetection, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: line {lineno}: {exc}") from exc
    return detections


# ---------------------------------------------------------------------------
# rule-based route


@dataclass(frozen=True)
class RulesVerdict:
    """Outcome of the geometric fall predicate.

    ``degraded`` is set when shoulders, hips or ankles were entirely
    unobserved; only the box-aspect cue contributes then and
    ``posture_collapsed`` is ``None``.
    """

    fall: bool
    degraded: bool
    posture_collapsed: Optional[bool]
    box_wider_than_tall: bool
    torso_length: Optional[float]

    def __bool__(self) -> bool:
        return self.fall


def _merged_point(detection, pair, threshold):
    # midpoint when both sides are observed, the single observed side
    # otherwise, None when the body part is missing altogether
    left, right = pair
    lok = detection.scores[left] >= threshold
    rok = detection.scores[right] >= threshold
    if lok and rok:
        return 0.5 * (detection.keypoints[left] + detection.keypoints[right])
    if lok:
        return np.array(detection.keypoints[left])
    if rok:
        return np.array(detection.keypoints[right])
    return None


def rules_fall(detection: PoseDetection, score_threshold: float = SCORE_THRESHOLD) -> RulesVerdict:
    """Decide "person is down" from keypoint geometry alone.

    A standing person has shoulders well above the feet and hips in
    between, with vertical slack proportional to the torso length
    ``l = |shoulder - hip|``.  The posture cue fires when all three
    relations collapse (shoulders within ``l`` of the feet, hips within
    ``l/2`` of the feet, shoulders within ``l/2`` of the hips -- y grows
    downward).  Independently a detection box wider than it is tall
    fires the aspect cue.  Either cue alone is a fall verdict.

    Both cues are invariant to translating the pose or scaling it about
    any point by a positive factor.
    """
    _, _, bw, bh = detection.bbox
    wide = bh < bw
    shoulder = _merged_point(detection, _SHOULDERS, score_threshold)
    hip = _merged_point(detection, _HIPS, score_threshold)
    foot = _merged_point(detection, _ANKLES, score_threshold)
    if shoulder is None or hip is None or foot is None:
        return RulesVerdict(
            fall=wide,
            degraded=True,
            posture_collapsed=None,
            box_wider_than_tall=wide,
            torso_length=None,
        )
    torso = float(np.linalg.norm(shoulder - hip))
    collapsed = (
        shoulder[1] > foot[1] - torso
        and hip[1] > foot[1] - torso / 2.0
        and shoulder[1] > hip[1] - torso / 2.0
    )
    return RulesVerdict(
        fall=bool(collapsed or wide),
        degraded=False,
        posture_collapsed=bool(collapsed),
        box_wider_than_tall=wide,
        torso_length=torso,
    )


# ---------------------------------------------------------------------------
# learned route


def features(
    detection: PoseDetection,
    image_size: Tuple[int, int] = DEFAULT_IMAGE_SIZE,
    score_threshold: float = SCORE_THRESHOLD,
) -> np.ndarray:
    """Flatten a detection into the 34-vector the network consumes.

    Keypoint coordinates are divided by the frame width/height;
    unobserved keypoints contribute ``(0, 0)``.  Layout is
    ``(x0, y0, x1, y1, ...)`` in keypoint order.
    """
    width, height = image_size
    if width <= 0 or height <= 0:
        raise ValueError(f"image_size must be positive, got {image_size!r}")
    scaled = detection.keypoints / np.array([float(width), float(height)])
    observed = detection.scores >= score_threshold
    return np.where(observed[:, None], scaled, 0.0).reshape(-1)


@dataclass(frozen=True, eq=False)
class MlpWeights:
    """Dense-network parameters: one (matrix, bias) pair per layer.

    ``weights[i]`` has shape ``(fan_in, fan_out)`` and consecutive
    layers must chain.  The architecture is implied by the shapes, so
    hand-built small networks work everywhere full-size ones do.
    """

    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]

    def __post_init__(self):
        ws = tuple(np.asarray(w, dtype=float) for w in self.weights)
        bs = tuple(np.asarray(b, dtype=float) for b in self.biases)
        if len(ws) != len(bs) or not ws:
            raise ShapeMismatch("need the same (nonzero) number of weight matrices and biases")
        for i, (w, b) in enumerate(zip(ws, bs)):
            if w.ndim != 2:
                raise ShapeMismatch(f"layer {i}: weight must be 2-D, got shape {w.shape}")
            if b.shape != (w.shape[1],):
                raise ShapeMismatch(
                    f"layer {i}: bias shape {b.shape} does not match fan-out {w.shape[1]}"
                )
            if i > 0 and w.shape[0] != ws[i - 1].shape[1]:
                raise ShapeMismatch(
                    f"layer {i}: fan-in {w.shape[0]} does not chain from "
                    f"previous fan-out {ws[i - 1].shape[1]}"
                )
        for arr in ws + bs:
            arr.setflags(write=False)
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def layer_sizes(self) -> Tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    @classmethod
    def glorot(cls, seed=0, layer_sizes: Sequence[int] = LAYER_SIZES) -> "MlpWeights":
        """Uniform Glorot initialisation, zero biases, reproducible by seed.

        ``seed`` may also be a ``numpy.random.Generator`` to draw from an
        existing stream.
        """
        rng = np.random.default_rng(seed)
        ws, bs = [], []
        for fan_in, fan_out in zip(layer_sizes, layer_sizes[1:]):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            ws.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            bs.append(np.zeros(fan_out))
        return cls(weights=tuple(ws), biases=tuple(bs))


def save_weights(path, weights: MlpWeights) -> None:
    """Serialise weights to JSON; floats round-trip exactly."""
    layers = []
    for w, b in zip(weights.weights, weights.biases):
        layers.append(
            {
                "rows": int(w.shape[0]),
                "cols": int(w.shape[1]),
                "weights": w.reshape(-1).tolist(),
                "bias": b.tolist(),
            }
        )
    Path(path).write_text(json.dumps({"layers": layers}, separators=(",", ":")))


def load_weights(path) -> MlpWeights:
    """Inverse of :func:`save_weights`.

    Unreadable or truncated JSON raises :class:`ParseError`; a file that
    parses but declares inconsistent shapes raises :class:`ShapeMismatch`.
    """
    try:
        blob = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(blob, dict) or not isinstance(blob.get("layers"), list) or not blob["layers"]:
        raise ParseError(f"{path}: expected an object with a nonempty 'layers' list")
    ws, bs = [], []
    for i, layer in enumerate(blob["layers"]):
        try:
            rows, cols = int(layer["rows"]), int(layer["cols"])
            flat = np.asarray(layer["weights"], dtype=float)
            bias = np.asarray(layer["bias"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: layer {i}: {exc}") from exc
        if flat.shape != (rows * cols,):
            raise ShapeMismatch(
                f"{path}: layer {i}: header says {rows}x{cols} but {flat.size} weights given"
            )
        ws.append(flat.reshape(rows, cols))
        bs.append(bias)
    return MlpWeights(weights=tuple(ws), biases=tuple(bs))


def _softmax(z):
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward(weights: MlpWeights, x) -> np.ndarray:
    """Class probabilities for one feature vector or a batch.

    ReLU hidden layers, numerically stable softmax output.  Accepts
    shape ``(d,)`` or ``(n, d)`` and returns probabilities of matching
    batch shape; rows sum to one.
    """
    a = np.asarray(x, dtype=float)
    single = a.ndim == 1
    if single:
        a = a[None, :]
    if a.ndim != 2 or a.shape[1] != weights.layer_sizes[0]:
        raise ShapeMismatch(
            f"input width {a.shape[-1] if a.ndim else 0} does not match "
            f"network input {weights.layer_sizes[0]}"
        )
    for w, b in zip(weights.weights[:-1], weights.biases[:-1]):
        a = np.maximum(a @ w + b, 0.0)
    probs = _softmax(a @ weights.weights[-1] + weights.biases[-1])
    return probs[0] if single else probs


def mlp_forward(
    weights: MlpWeights,
    detection: PoseDetection,
    image_size: Tuple[int, int] = DEFAULT_IMAGE_SIZE,
    score_threshold: float = SCORE_THRESHOLD,
) -> Tuple[float, float]:
    """Classify one detection: returns ``(p_fall, p_not_fall)``."""
    probs = forward(weights, features(detection, image_size, score_threshold))
    return float(probs[FALL_CLASS]), float(probs[1 - FALL_CLASS])


def predict_fall_probability(
    weights: MlpWeights,
    detection: PoseDetection,
    image_size: Tuple[int, int] = DEFAULT_IMAGE_SIZE,
    score_threshold: float = SCORE_THRESHOLD,
) -> float:
    return mlp_forward(weights, detection, image_size, score_threshold)[0]


def loss_and_gradients(weights: MlpWeights, x, targets):
    """Mean cross-entropy over a batch plus gradients for every parameter.

    ``targets`` is one-hot, shape ``(n, classes)``.  Returns
    ``(loss, weight_grads, bias_grads)`` with gradient tuples shaped
    exactly like the parameters.  The loss is left unclipped, so a
    saturated prediction on a wrong label legitimately produces ``inf``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if x.shape[0] != targets.shape[0]:
        raise ShapeMismatch(f"{x.shape[0]} inputs vs {targets.shape[0]} targets")
    n = x.shape[0]

    activations = [x]
    pre = []
    a = x
    for w, b in zip(weights.weights[:-1], weights.biases[:-1]):
        z = a @ w + b
        pre.append(z)
        a = np.maximum(z, 0.0)
        activations.append(a)
    logits = a @ weights.weights[-1] + weights.biases[-1]
    probs = _softmax(logits)
    with np.errstate(divide="ignore", invalid="ignore"):
        # a saturated wrong answer gives log(0); the nan/inf is surfaced to
        # the caller as a non-finite loss instead of being clipped away
        logp = np.log(probs)
        loss = float(-(targets * logp).sum() / n)

    w_grads = [None] * len(weights.weights)
    b_grads = [None] * len(weights.biases)
    delta = (probs - targets) / n
    for i in range(len(weights.weights) - 1, -1, -1):
        w_grads[i] = activations[i].T @ delta
        b_grads[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ weights.weights[i].T) * (pre[i - 1] > 0)
    return loss, tuple(w_grads), tuple(b_grads)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 500
    batch_size: Optional[int] = None  # None = full batch
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or not math.isfinite(self.learning_rate):
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1 or None, got {self.batch_size}")


@dataclass(frozen=True)
class TrainResult:
    weights: MlpWeights
    losses: Tuple[float, ...]  # mean cross-entropy per epoch
    final_loss: float
    final_accuracy: float  # training-set accuracy of the final weights


def mlp_train(
    dataset: Sequence[Tuple[PoseDetection, int]],
    config: TrainConfig = TrainConfig(),
    image_size: Tuple[int, int] = DEFAULT_IMAGE_SIZE,
    score_threshold: float = SCORE_THRESHOLD,
) -> TrainResult:
    """Fit the fall classifier by plain gradient descent.

    ``dataset`` is a sequence of ``(detection, label)`` pairs with 0/1
    labels; both classes must be present.  Label 1 maps to the fall
    output (class index :data:`FALL_CLASS`).  Training is deterministic
    for a given seed: initialisation and minibatch shuffling share one
    generator.  A non-finite loss aborts with :class:`NonfiniteLoss`
    rather than silently returning garbage weights.
    """
    if not dataset:
        raise EmptyClass("no training examples supplied")
    detections, labels = [], []
    for item in dataset:
        try:
            det, label = item
        except (TypeError, ValueError):
            raise MalformedDetection(
                "dataset entries must be (detection, label) pairs"
            ) from None
        if not isinstance(det, PoseDetection):
            raise MalformedDetection(f"expected a PoseDetection, got {type(det).__name__}")
        if label not in (0, 1):
            raise MalformedDetection(f"label must be 0 or 1, got {label!r}")
        detections.append(det)
        labels.append(label)
    labels = np.asarray(labels, dtype=int)
    if not (np.any(labels == 0) and np.any(labels == 1)):
        missing = "fallen" if not np.any(labels == 1) else "not-fallen"
        raise EmptyClass(f"training set has no '{missing}' examples")

    x = np.stack([features(det, image_size, score_threshold) for det in detections])
    targets = np.stack([labels, 1 - labels], axis=1).astype(float)
    if FALL_CLASS != 0:  # pragma: no cover - layout guard
        targets = targets[:, ::-1]

    rng = np.random.default_rng(config.seed)
    weights = MlpWeights.glorot(seed=rng)
    n = x.shape[0]
    batch = n if config.batch_size is None else min(config.batch_size, n)

    losses = []
    for epoch in range(config.epochs):
        if batch == n:
            order = np.arange(n)
        else:
            order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            loss, w_grads, b_grads = loss_and_gradients(weights, x[idx], targets[idx])
            if not math.isfinite(loss):
                raise NonfiniteLoss(f"epoch {epoch}: loss became {loss}")
            epoch_loss += loss * len(idx)
            weights = MlpWeights(
                weights=tuple(
                    w - config.learning_rate * g for w, g in zip(weights.weights, w_grads)
                ),
                biases=tuple(
                    b - config.learning_rate * g for b, g in zip(weights.biases, b_grads)
                ),
            )
        losses.append(epoch_loss / n)

    predicted = np.argmax(forward(weights, x), axis=1) == FALL_CLASS
    accuracy = float(np.mean(predicted.astype(int) == labels))
    return TrainResult(
        weights=weights,
        losses=tuple(losses),
        final_loss=losses[-1],
        final_accuracy=accuracy,
    )
