"""Pixel-transfer maps between two calibrated camera views.

A world plane seen by two pinhole cameras induces a 3x3 projective map
between their image planes: every pixel in the first view that images a
point on that plane has a well-defined partner pixel in the second view.
This module builds those maps from intrinsics and relative pose, samples
stacks of them over a range of plane distances, and synthesizes the map
produced by pitching a camera about a point on its optical axis.

Conventions used throughout:

- pixel coordinates are (u, v) with v growing downward;
- camera frames are right-handed with +z along the optical axis and +y down;
- a plane ``{x : n . x = d}`` is expressed in the first camera's coordinates,
  with ``n`` a unit normal and ``d`` its offset from that camera's center;
- ``rotation`` / ``translation`` take first-camera coordinates into
  second-camera coordinates: ``x2 = rotation @ x1 + translation``;
- every 3x3 map is stored in a canonical scale (see :class:`Homography`),
  since the map is only meaningful up to a nonzero scalar.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InvalidPlane,
    InvalidRange,
    ParseError,
    PointAtInfinity,
    SingularHomography,
)

# Scale pinning: when the bottom-right entry is larger than this, divide it
# out; otherwise fall back to unit Frobenius norm with a sign convention.
PIVOT_EPS = 1e-9
# Determinant magnitude below which a map is treated as rank deficient.
SINGULARITY_EPS = 1e-12
# Homogeneous scale magnitude below which a mapped point has no finite image.
INFINITY_EPS = 1e-12
# Orthonormality / determinant tolerance for rotation matrices.
ROTATION_TOL = 1e-9
# Allowed deviation of a plane normal from unit length.
UNIT_NORMAL_TOL = 1e-12

DEFAULT_CANDIDATE_COUNT = 8


def _as_matrix(value, shape, name: str) -> np.ndarray:
    arr = np.array(value, dtype=np.float64)
    if arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _check_rotation(r: np.ndarray) -> None:
    if np.max(np.abs(r @ r.T - np.eye(3))) > ROTATION_TOL:
        raise ValueError("rotation is not orthonormal")
    if abs(np.linalg.det(r) - 1.0) > ROTATION_TOL:
        raise ValueError("rotation determinant is not +1 (improper rotation)")


@dataclass(frozen=True)
class CameraModel:
    """A pinhole camera: intrinsics plus a world-to-camera rigid pose.

    Attributes:
        intrinsics: 3x3 upper-triangular matrix with positive focal lengths.
        rotation: 3x3 rotation taking world coordinates into this camera's
            frame. Defaults to the identity.
        translation: length-3 offset completing the world-to-camera map,
            ``x_cam = rotation @ x_world + translation``. Defaults to zero.
    """

    intrinsics: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        k = _as_matrix(self.intrinsics, (3, 3), "intrinsics")
        r = _as_matrix(self.rotation, (3, 3), "rotation")
        t = _as_matrix(self.translation, (3,), "translation")
        if k[1, 0] != 0.0 or k[2, 0] != 0.0 or k[2, 1] != 0.0:
            raise ValueError("intrinsics must be upper triangular")
        if k[0, 0] <= 0.0 or k[1, 1] <= 0.0:
            raise ValueError("focal lengths must be positive")
        if k[2, 2] == 0.0:
            raise ValueError("intrinsics bottom-right entry must be nonzero")
        _check_rotation(r)
        for name, arr in (("intrinsics", k), ("rotation", r), ("translation", t)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class Plane:
    """A plane ``{x : normal . x = distance}`` in camera coordinates."""

    normal: np.ndarray
    distance: float

    def __post_init__(self):
        n = _as_matrix(self.normal, (3,), "normal")
        norm = float(np.linalg.norm(n))
        if abs(norm - 1.0) > UNIT_NORMAL_TOL:
            raise InvalidPlane(f"plane normal has length {norm!r}, expected 1")
        d = float(self.distance)
        if not np.isfinite(d):
            raise InvalidPlane("plane distance must be finite")
        n.setflags(write=False)
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "distance", d)

    @classmethod
    def from_vector(cls, direction, distance: float) -> "Plane":
        """Build a plane from any nonzero normal direction (normalized here)."""
        v = _as_matrix(direction, (3,), "direction")
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            raise InvalidPlane("plane normal direction must be nonzero")
        return cls(v / norm, distance)


def canonical_scale(matrix: np.ndarray) -> np.ndarray:
    """Rescale a 3x3 projective map into its canonical representative.

    When the bottom-right entry has magnitude above PIVOT_EPS the matrix is
    divided by it; otherwise it is scaled to unit Frobenius norm with the
    first nonzero entry (row-major order) made positive.
    """
    m = np.array(matrix, dtype=np.float64)
    pivot = m[2, 2]
    if abs(pivot) > PIVOT_EPS:
        return m / pivot
    m = m / np.linalg.norm(m)
    flat = m.ravel()
    nonzero = flat[flat != 0.0]
    if nonzero.size and nonzero[0] < 0.0:
        m = -m
    return m


@dataclass(frozen=True)
class Homography:
    """An invertible 3x3 pixel-transfer map, stored in canonical scale."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _as_matrix(self.matrix, (3, 3), "matrix")
        m = canonical_scale(m)
        if abs(np.linalg.det(m)) < SINGULARITY_EPS:
            raise SingularHomography(
                "map is rank deficient (|det| below {:g})".format(SINGULARITY_EPS)
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))

    def __matmul__(self, other: "Homography") -> "Homography":
        """Composition: ``(a @ b)`` applies ``b`` first, then ``a``."""
        return Homography(self.matrix @ other.matrix)


def apply_homography(h, point):
    """Map pixel coordinates through a 3x3 projective transform.

    Args:
        h: a Homography or any 3x3 array-like.
        point: (u, v) pair or an (N, 2) array of pixel coordinates.

    Returns:
        Mapped coordinates with the same leading shape as the input.

    Raises:
        PointAtInfinity: if any mapped point has homogeneous scale within
            INFINITY_EPS of zero (no finite image).
    """
    m = h.matrix if isinstance(h, Homography) else _as_matrix(h, (3, 3), "matrix")
    pts = np.asarray(point, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("point must be (2,) or (N, 2)")
    mapped = pts @ m[:, :2].T + m[:, 2]
    w = mapped[:, 2]
    if np.any(np.abs(w) <= INFINITY_EPS):
        raise PointAtInfinity("mapped point has no finite image")
    out = mapped[:, :2] / w[:, np.newaxis]
    return out[0] if single else out


def plane_homography(k1, k2, rotation, translation, plane: Plane) -> Homography:
    """Pixel-transfer map induced by a plane between two calibrated views.

    For any point x on ``plane`` (expressed in camera-1 coordinates), the
    pixel it projects to in camera 1 maps to its pixel in camera 2 by the
    returned 3x3 transform:

        d * K2 @ R @ inv(K1)  +  K2 @ (t outer n) @ inv(K1)

    where (R, t) take camera-1 coordinates into camera-2 coordinates and
    (n, d) are the plane's unit normal and offset.

    Args:
        k1: camera-1 intrinsics, 3x3 upper triangular.
        k2: camera-2 intrinsics, 3x3 upper triangular.
        rotation: 3x3 rotation, camera-1 frame to camera-2 frame.
        translation: length-3 translation completing that map.
        plane: the inducing plane in camera-1 coordinates.

    Raises:
        SingularHomography: if the configuration is degenerate (for example
            the plane passes through a camera center).
    """
    k1 = _as_matrix(k1, (3, 3), "k1")
    k2 = _as_matrix(k2, (3, 3), "k2")
    r = _as_matrix(rotation, (3, 3), "rotation")
    t = _as_matrix(translation, (3,), "translation")
    if not isinstance(plane, Plane):
        raise InvalidPlane("plane must be a Plane instance")
    k1_inv = np.linalg.inv(k1)
    m = plane.distance * k2 @ r @ k1_inv + np.outer(k2 @ t, plane.normal) @ k1_inv
    return Homography(m)


def relative_pose(cam1: CameraModel, cam2: CameraModel):
    """Rigid map from camera-1 coordinates to camera-2 coordinates.

    Both cameras carry world-to-camera poses; the relative pose follows as
    ``R = R2 @ R1.T`` and ``t = t2 - R @ t1``.
    """
    r = cam2.rotation @ cam1.rotation.T
    t = cam2.translation - r @ cam1.translation
    return r, t


def sample_homographies(
    cam1: CameraModel,
    cam2: CameraModel,
    normal,
    min_distance: float,
    max_distance: float,
    count: int = DEFAULT_CANDIDATE_COUNT,
):
    """Candidate transfer maps for evenly spaced plane offsets.

    The person (or other subject) stands somewhere between ``min_distance``
    and ``max_distance`` along the plane normal; one transfer map is built
    per hypothesized offset so a downstream consumer can pick the best one.

    Args:
        cam1, cam2: calibrated views with world-to-camera poses.
        normal: plane normal direction in camera-1 coordinates (any nonzero
            vector; normalized here).
        min_distance: smallest plane offset, must be > 0.
        max_distance: largest plane offset, must be >= min_distance.
        count: number of evenly spaced offsets, >= 1.

    Returns:
        List of (distance, Homography) pairs in ascending distance order.

    Raises:
        InvalidRange: if the offsets or count are out of domain.
    """
    if min_distance <= 0.0:
        raise InvalidRange("min_distance must be positive")
    if min_distance > max_distance:
        raise InvalidRange("min_distance must not exceed max_distance")
    if count < 1:
        raise InvalidRange("count must be at least 1")
    v = _as_matrix(normal, (3,), "normal")
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise InvalidPlane("plane normal direction must be nonzero")
    unit = v / norm
    r, t = relative_pose(cam1, cam2)
    out = []
    for d in np.linspace(min_distance, max_distance, count):
        plane = Plane(unit, float(d))
        h = plane_homography(cam1.intrinsics, cam2.intrinsics, r, t, plane)
        out.append((float(d), h))
    return out


def pitch_homography(intrinsics, theta_deg: float, target_distance: float) -> Homography:
    """Transfer map for a camera pitched about a point on its optical axis.

    The second view is the same camera rotated by ``theta_deg`` about the
    horizontal image axis through the point at ``target_distance`` straight
    ahead, so that point stays pinned at the principal point. Useful for
    synthesizing tilted variants of an upright view.

    Args:
        intrinsics: 3x3 camera matrix (shared by both views).
        theta_deg: pitch angle in degrees, 0 <= theta < 90.
        target_distance: distance to the pivot point, > 0.

    Raises:
        InvalidRange: if the angle or distance is out of domain.
    """
    if not 0.0 <= theta_deg < 90.0:
        raise InvalidRange("theta_deg must satisfy 0 <= theta < 90")
    if target_distance <= 0.0:
        raise InvalidRange("target_distance must be positive")
    k = _as_matrix(intrinsics, (3, 3), "intrinsics")
    th = np.radians(theta_deg)
    c, s = np.cos(th), np.sin(th)
    r = np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    pivot = np.array([0.0, 0.0, float(target_distance)])
    t = pivot - r @ pivot
    plane = Plane(np.array([0.0, 0.0, 1.0]), float(target_distance))
    return plane_homography(k, k, r, t, plane)


def save_homography(path, h: Homography) -> None:
    """Write a transfer map as 9 whitespace-separated decimals, row-major."""
    rows = [" ".join(repr(float(x)) for x in row) for row in h.matrix]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(rows) + "\n")


def load_homography(path) -> Homography:
    """Read a transfer map written by :func:`save_homography`."""
    with open(path, "r", encoding="ascii") as fh:
        tokens = fh.read().split()
    if len(tokens) != 9:
        raise ParseError(f"{path}: expected 9 numbers, found {len(tokens)}")
    try:
        values = [float(tok) for tok in tokens]
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return Homography(np.array(values).reshape(3, 3))
