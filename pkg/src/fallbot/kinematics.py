"""Velocity conversions for a four-wheel mecanum drive.

Wheel layout (viewed from above, +x forward, +y left, rotation positive
counter-clockwise):

    FL ---- FR
    |        |
    RL ---- RR

Each wheel's angular speed follows from the body velocity by the standard
roller-geometry relations; the reverse direction uses the least-squares
pseudo-inverse of that map, which for this symmetric layout reduces to the
four averaging formulas below.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

WHEELS = ("FL", "FR", "RL", "RR")


class BodyVelocity(NamedTuple):
    """Planar body velocity: forward m/s, leftward m/s, yaw rad/s."""

    vx: float
    vy: float
    wz: float


class WheelSpeeds(NamedTuple):
    """Angular speeds of the four wheels, rad/s, in FL, FR, RL, RR order."""

    fl: float
    fr: float
    rl: float
    rr: float


@dataclass(frozen=True)
class ChassisGeometry:
    """Wheel radius and effective robot radius (both meters, positive).

    The robot radius is the sum of the half-wheelbase and half-track lengths,
    i.e. the lever arm converting yaw rate into wheel surface speed.
    """

    wheel_radius: float
    robot_radius: float

    def __post_init__(self):
        if not self.wheel_radius > 0.0:
            raise ValueError("wheel_radius must be positive")
        if not self.robot_radius > 0.0:
            raise ValueError("robot_radius must be positive")


def inverse_kinematics(v: BodyVelocity, geometry: ChassisGeometry) -> WheelSpeeds:
    """Wheel speeds that realize a desired body velocity.

    Args:
        v: desired planar body velocity.
        geometry: chassis dimensions.

    Returns:
        Wheel angular speeds (rad/s). Positive yaw (counter-clockwise)
        drives the right-side wheels faster than the left.
    """
    r = geometry.wheel_radius
    arm = geometry.robot_radius
    vx, vy, wz = v
    return WheelSpeeds(
        fl=(vx + vy - arm * wz) / r,
        fr=(vx - vy + arm * wz) / r,
        rl=(vx - vy - arm * wz) / r,
        rr=(vx + vy + arm * wz) / r,
    )


def forward_kinematics(w: WheelSpeeds, geometry: ChassisGeometry) -> BodyVelocity:
    """Body velocity realized by given wheel speeds (least-squares sense).

    This is the pseudo-inverse of :func:`inverse_kinematics`: for any body
    velocity v, ``forward(inverse(v))`` returns v.
    """
    r = geometry.wheel_radius
    arm = geometry.robot_radius
    fl, fr, rl, rr = w
    return BodyVelocity(
        vx=r * (fl + fr + rl + rr) / 4.0,
        vy=r * (fl - fr - rl + rr) / 4.0,
        wz=r * (-fl + fr - rl + rr) / (4.0 * arm),
    )
