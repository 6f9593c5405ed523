"""Flat ``key = value`` configuration files shared by the CLI tools.

One setting per line; ``#`` starts a comment line; values with several
numbers are whitespace-separated.  Example::

    # camera
    fx = 700.0
    fy = 700.0
    cx = 320.0
    cy = 260.0
    rotation = 1 0 0  0 1 0  0 0 1
    translation = 0 0 0

    # chassis
    wheel_radius = 0.05
    robot_radius = 0.2

Syntax problems raise :class:`ParseError`; missing or badly typed
settings raise :class:`InvalidConfig` when a consumer asks for them.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .errors import InvalidConfig, ParseError
from .kinematics import ChassisGeometry
from .projective import CameraModel


def parse_config(path) -> Dict[str, str]:
    entries: Dict[str, str] = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"{path}: line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ParseError(f"{path}: line {lineno}: empty key")
        if key in entries:
            raise ParseError(f"{path}: line {lineno}: duplicate key {key!r}")
        entries[key] = value.strip()
    return entries


def config_str(cfg: Dict[str, str], key: str, default: Optional[str] = None) -> str:
    if key in cfg:
        return cfg[key]
    if default is not None:
        return default
    raise InvalidConfig(f"missing config key {key!r}")


def config_floats(cfg: Dict[str, str], key: str, count: Optional[int] = None) -> List[float]:
    raw = config_str(cfg, key)
    try:
        values = [float(tok) for tok in raw.split()]
    except ValueError as exc:
        raise InvalidConfig(f"config key {key!r}: {exc}") from exc
    if count is not None and len(values) != count:
        raise InvalidConfig(f"config key {key!r}: expected {count} numbers, got {len(values)}")
    return values


def config_float(cfg: Dict[str, str], key: str, default: Optional[float] = None) -> float:
    if key not in cfg:
        if default is not None:
            return default
        raise InvalidConfig(f"missing config key {key!r}")
    return config_floats(cfg, key, count=1)[0]


def config_int(cfg: Dict[str, str], key: str, default: Optional[int] = None) -> int:
    if key not in cfg:
        if default is not None:
            return default
        raise InvalidConfig(f"missing config key {key!r}")
    try:
        return int(cfg[key])
    except ValueError as exc:
        raise InvalidConfig(f"config key {key!r}: {exc}") from exc


def camera_from_config(cfg: Dict[str, str]) -> CameraModel:
    """Camera from keys fx, fy, cx, cy and optional rotation/translation."""
    fx = config_float(cfg, "fx")
    fy = config_float(cfg, "fy")
    cx = config_float(cfg, "cx")
    cy = config_float(cfg, "cy")
    intrinsics = np.array([[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]])
    rotation = np.eye(3)
    translation = np.zeros(3)
    if "rotation" in cfg:
        rotation = np.array(config_floats(cfg, "rotation", count=9)).reshape(3, 3)
    if "translation" in cfg:
        translation = np.array(config_floats(cfg, "translation", count=3))
    try:
        return CameraModel(intrinsics=intrinsics, rotation=rotation, translation=translation)
    except ValueError as exc:
        raise InvalidConfig(f"camera config: {exc}") from exc


def chassis_from_config(cfg: Dict[str, str]) -> ChassisGeometry:
    """Chassis from keys wheel_radius and robot_radius."""
    try:
        return ChassisGeometry(
            wheel_radius=config_float(cfg, "wheel_radius"),
            robot_radius=config_float(cfg, "robot_radius"),
        )
    except ValueError as exc:
        raise InvalidConfig(f"chassis config: {exc}") from exc
