"""Shared synthetic-scene builders for the test suite."""

import numpy as np


def rodrigues(axis, angle_rad):
    """Rotation matrix about a (nonzero) axis by an angle."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    kx, ky, kz = axis
    k = np.array([[0.0, -kz, ky], [kz, 0.0, -kx], [-ky, kx, 0.0]])
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return np.eye(3) + s * k + (1.0 - c) * (k @ k)


def random_intrinsics(rng):
    fx = rng.uniform(400.0, 900.0)
    fy = rng.uniform(400.0, 900.0)
    cx = rng.uniform(200.0, 500.0)
    cy = rng.uniform(150.0, 400.0)
    return np.array([[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]])


def random_scene(rng, n_points=8):
    """Two calibrated views of one world plane, with exact correspondences.

    Camera 1 sits at the origin; camera 2 is a small rigid motion away. The
    plane faces roughly toward both cameras. Points are chosen on the plane
    through camera-1 pixels so that every correspondence is exact.

    Returns a dict with k1, k2, rotation, translation, normal, distance,
    src (N,2) camera-1 pixels and dst (N,2) camera-2 pixels.
    """
    k1 = random_intrinsics(rng)
    k2 = random_intrinsics(rng)
    rotation = rodrigues(rng.normal(size=3), rng.uniform(0.0, 0.25))
    translation = rng.uniform(-0.4, 0.4, size=3)

    normal = np.array([0.0, 0.0, 1.0]) + 0.25 * rng.normal(size=3)
    normal = normal / np.linalg.norm(normal)
    if normal[2] < 0:
        normal = -normal
    distance = rng.uniform(1.5, 5.0)

    src = np.column_stack([
        rng.uniform(100.0, 700.0, size=n_points),
        rng.uniform(100.0, 500.0, size=n_points),
    ])
    k1_inv = np.linalg.inv(k1)
    dst = np.empty_like(src)
    for i, (u, v) in enumerate(src):
        ray = k1_inv @ np.array([u, v, 1.0])
        lam = distance / float(normal @ ray)
        assert lam > 0, "scene construction: point behind camera 1"
        x1 = lam * ray
        x2 = rotation @ x1 + translation
        assert x2[2] > 0.1, "scene construction: point behind camera 2"
        proj = k2 @ x2
        dst[i] = proj[:2] / proj[2]
    return {
        "k1": k1,
        "k2": k2,
        "rotation": rotation,
        "translation": translation,
        "normal": normal,
        "distance": distance,
        "src": src,
        "dst": dst,
    }


def psnr(a, b):
    """Peak signal-to-noise ratio between two uint8 images, in dB."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return np.inf
    return 10.0 * np.log10(255.0 ** 2 / mse)


# ---------------------------------------------------------------------------
# synthetic people for the fall-detection tests

# Offsets from a reference point between the ears, y growing downward,
# roughly proportioned like an adult seen from the front.  Order matches
# fallbot.falldet.KEYPOINT_NAMES.
POSE_OFFSETS = np.array(
    [
        [0.0, 0.0],  # nose
        [4.0, -4.0], [-4.0, -4.0],  # eyes
        [8.0, -2.0], [-8.0, -2.0],  # ears
        [15.0, 20.0], [-15.0, 20.0],  # shoulders
        [20.0, 45.0], [-20.0, 45.0],  # elbows
        [22.0, 70.0], [-22.0, 70.0],  # wrists
        [10.0, 75.0], [-10.0, 75.0],  # hips
        [11.0, 115.0], [-11.0, 115.0],  # knees
        [12.0, 155.0], [-12.0, 155.0],  # ankles
    ]
)


def detection_around(keypoints, scores=None, label=None, confidence=0.9, margin=5.0):
    """Wrap raw keypoints in a PoseDetection with a snug bounding box."""
    from fallbot.falldet import NUM_KEYPOINTS, PoseDetection

    keypoints = np.asarray(keypoints, dtype=float)
    if scores is None:
        scores = np.full(NUM_KEYPOINTS, 0.9)
    lo = keypoints.min(axis=0) - margin
    hi = keypoints.max(axis=0) + margin
    bbox = (float(lo[0]), float(lo[1]), float(hi[0] - lo[0]), float(hi[1] - lo[1]))
    return PoseDetection(
        bbox=bbox, keypoints=keypoints, scores=scores, confidence=confidence, label=label
    )


def standing_pose(center=(320.0, 240.0), rng=None, jitter=0.0, label=0):
    """An upright person whose body is centred near ``center``."""
    kp = POSE_OFFSETS + np.asarray(center, dtype=float) - np.array([0.0, 80.0])
    if jitter:
        kp = kp + rng.uniform(-jitter, jitter, size=kp.shape)
    return detection_around(kp, label=label)


def lying_pose(center=(320.0, 240.0), rng=None, jitter=0.0, label=1):
    """The same body rotated onto the ground (head to the left)."""
    kp = POSE_OFFSETS[:, ::-1] + np.asarray(center, dtype=float) - np.array([80.0, 0.0])
    if jitter:
        kp = kp + rng.uniform(-jitter, jitter, size=kp.shape)
    return detection_around(kp, label=label)


def pose_dataset(rng, n_per_class=40, jitter=4.0):
    """Labelled standing/fallen detections at random frame positions."""
    out = []
    for _ in range(n_per_class):
        center = rng.uniform([150.0, 140.0], [480.0, 320.0])
        out.append(standing_pose(center, rng=rng, jitter=jitter, label=0))
        center = rng.uniform([150.0, 140.0], [440.0, 360.0])
        out.append(lying_pose(center, rng=rng, jitter=jitter, label=1))
    return out


def labelled_pairs(detections):
    """(detection, label) training pairs from labelled detections."""
    return [(d, d.label) for d in detections]
