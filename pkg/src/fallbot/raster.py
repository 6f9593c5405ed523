"""8-bit raster images: loading, saving, and projective warping.

Images are plain numpy arrays: ``(rows, cols)`` uint8 for grayscale and
``(rows, cols, 3)`` uint8 for color. Pixel (u, v) denotes column u, row v.
Supported file formats are PNG plus the binary netpbm pair PGM/PPM.
"""

from __future__ import annotations

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import UnreadableImage
from .projective import INFINITY_EPS, Homography

_SAVE_SUFFIXES = (".png", ".pgm", ".ppm")


def _check_image(image) -> np.ndarray:
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        raise ValueError(f"image must be uint8, got {arr.dtype}")
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[2] == 3:
        return arr
    raise ValueError(f"image must be (rows, cols) or (rows, cols, 3), got {arr.shape}")


def load_image(path) -> np.ndarray:
    """Decode a PNG/PGM/PPM file into a uint8 array (grayscale or RGB)."""
    try:
        with Image.open(path) as img:
            if img.mode not in ("L", "RGB"):
                img = img.convert("RGB")
            arr = np.asarray(img, dtype=np.uint8)
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise UnreadableImage(f"{path}: {exc}") from None
    return arr


def save_image(path, image) -> None:
    """Encode a uint8 array to PNG, binary PGM (gray), or binary PPM (color)."""
    arr = _check_image(image)
    name = str(path)
    suffix = name[name.rfind(".") :].lower() if "." in name else ""
    if suffix not in _SAVE_SUFFIXES:
        raise ValueError(f"unsupported image suffix {suffix!r}, use one of {_SAVE_SUFFIXES}")
    if suffix == ".pgm" and arr.ndim != 2:
        raise ValueError("PGM stores grayscale; got a color image")
    if suffix == ".ppm" and arr.ndim != 3:
        raise ValueError("PPM stores color; got a grayscale image")
    Image.fromarray(arr).save(name)


def warp_image(image, h: Homography) -> np.ndarray:
    """Resample an image under a pixel-transfer map.

    Every output pixel q takes its value from the input at inv(h) @ q,
    bilinearly interpolated; samples that land outside the input (or have no
    finite preimage) are filled with 0. Output size equals input size.
    """
    arr = _check_image(image)
    rows, cols = arr.shape[:2]
    inv = np.linalg.inv(h.matrix)

    us, vs = np.meshgrid(np.arange(cols, dtype=np.float64),
                         np.arange(rows, dtype=np.float64))
    w = inv[2, 0] * us + inv[2, 1] * vs + inv[2, 2]
    finite = np.abs(w) > INFINITY_EPS
    w_safe = np.where(finite, w, 1.0)
    sx = (inv[0, 0] * us + inv[0, 1] * vs + inv[0, 2]) / w_safe
    sy = (inv[1, 0] * us + inv[1, 1] * vs + inv[1, 2]) / w_safe

    valid = finite & (sx >= 0.0) & (sx <= cols - 1.0) & (sy >= 0.0) & (sy <= rows - 1.0)
    sx = np.where(valid, sx, 0.0)
    sy = np.where(valid, sy, 0.0)

    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x1 = np.minimum(x0 + 1, cols - 1)
    y1 = np.minimum(y0 + 1, rows - 1)
    fx = sx - x0
    fy = sy - y0

    img = arr.astype(np.float64)
    if img.ndim == 2:
        img = img[:, :, np.newaxis]
    wx0, wx1 = (1.0 - fx)[..., np.newaxis], fx[..., np.newaxis]
    wy0, wy1 = (1.0 - fy)[..., np.newaxis], fy[..., np.newaxis]
    out = (img[y0, x0] * wx0 * wy0 + img[y0, x1] * wx1 * wy0
           + img[y1, x0] * wx0 * wy1 + img[y1, x1] * wx1 * wy1)
    out = np.where(valid[..., np.newaxis], out, 0.0)
    out = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return out[:, :, 0] if arr.ndim == 2 else out
