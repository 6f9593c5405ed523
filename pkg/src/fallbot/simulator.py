"""Discrete-time kinematic simulation of the mecanum chassis on a circle.

The scenario: command the robot to drive a circle of a given radius at a
constant angular speed and watch how far it actually strays, under two
wheel-speed controllers --

* ``with_sysid``: inverts the per-wheel duty/speed calibration
  (:func:`fallbot.sysid.pwm_for_speed`), so each wheel gets the duty that
  the calibrated model says produces the demanded speed;
* ``without_sysid``: one shared linear gain from wheel speed to duty,
  scaled so the fastest achievable wheel speed maps to full duty.

The simulated plant is the algebraic inverse of the same calibration:
duty is rounded to an integer, clamped to the signed 8-bit range, and
converted back to a wheel speed.  Passing ``plant=None`` bypasses the
duty path entirely (ideal actuation: wheels do exactly what they are
told), which isolates pure integration error.

Everything is deterministic; the commanded body velocity is constant
over the run, so the controller and plant are evaluated once and the
pose is integrated by first-order body-frame Euler steps.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import EmptyLog, InvalidConfig, ParseError
from .kinematics import BodyVelocity, ChassisGeometry, WheelSpeeds, WHEELS, forward_kinematics, inverse_kinematics
from .sysid import MotorParams, NEGATIVE, POSITIVE, PWM_LIMIT, pwm_for_speed, speed_for_pwm

TWO_PI = 2.0 * math.pi

#: Default integrator step (seconds); small enough that integration
#: error is negligible next to actuation error.
DEFAULT_DT = 0.05

#: Default commanded angular speed (rad/s) when a caller gives none.
DEFAULT_ANGULAR_SPEED = 0.3


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    t = math.fmod(theta + math.pi, TWO_PI)
    if t <= 0.0:
        t += TWO_PI
    return t - math.pi


@dataclass(frozen=True)
class RobotPose:
    """Planar pose in the world frame; heading wrapped to (-pi, pi]."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        for name in ("x", "y", "theta"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"pose {name} must be finite")
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))


class ControllerKind(enum.Enum):
    """Which wheel-speed-to-duty mapping drives the simulated robot."""

    WITH_SYSID = "with_sysid"
    WITHOUT_SYSID = "without_sysid"


@dataclass(frozen=True)
class TrajectoryLog:
    """Uniformly sampled poses: ``entries[k] = (k * dt, pose_k)``."""

    dt: float
    entries: Tuple[Tuple[float, RobotPose], ...]

    def __post_init__(self):
        entries = tuple((float(t), pose) for t, pose in self.entries)
        if len(entries) >= 2:
            if not (self.dt > 0.0 and math.isfinite(self.dt)):
                raise ValueError(f"dt must be positive, got {self.dt}")
            for (t0, _), (t1, _) in zip(entries, entries[1:]):
                if not t1 > t0:
                    raise ValueError("timestamps must be strictly increasing")
                if abs((t1 - t0) - self.dt) > 1e-9 * max(1.0, abs(self.dt)):
                    raise ValueError(
                        f"non-uniform spacing: {t1 - t0} between {t0} and {t1}, expected {self.dt}"
                    )
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "dt", float(self.dt))

    def __len__(self):
        return len(self.entries)

    def poses(self):
        return [pose for _, pose in self.entries]

    def positions(self) -> np.ndarray:
        """(n, 2) array of x, y."""
        return np.array([[pose.x, pose.y] for _, pose in self.entries], dtype=float)


def linear_pwm_slope(params: MotorParams) -> float:
    """Duty per unit wheel speed for the uncalibrated controller.

    The gain maps the largest wheel speed the calibration says any wheel
    can reach (at full duty, either direction) to full duty: one number
    for all wheels, ignoring per-wheel offsets entirely.
    """
    omega_max = 0.0
    for wheel, direction in params.groups():
        rail = PWM_LIMIT if direction == POSITIVE else -PWM_LIMIT
        omega_max = max(omega_max, abs(speed_for_pwm(params, wheel, rail)))
    if omega_max <= 0.0:
        raise InvalidConfig("calibration admits no nonzero wheel speed")
    return PWM_LIMIT / omega_max


def _plant_wheel_speed(params: MotorParams, wheel: str, duty: float) -> float:
    # integer duty, signed 8-bit clamp, then the calibrated speed model
    quantized = float(np.rint(duty))
    quantized = max(-PWM_LIMIT, min(PWM_LIMIT, quantized))
    return speed_for_pwm(params, wheel, quantized)


def _actual_body_velocity(
    plant: Optional[MotorParams],
    controller: ControllerKind,
    desired: BodyVelocity,
    geometry: ChassisGeometry,
) -> BodyVelocity:
    demanded = inverse_kinematics(desired, geometry)
    if plant is None:
        return forward_kinematics(demanded, geometry)
    if controller is ControllerKind.WITH_SYSID:
        duties = [pwm_for_speed(plant, w, omega) for w, omega in zip(WHEELS, demanded)]
    elif controller is ControllerKind.WITHOUT_SYSID:
        slope = linear_pwm_slope(plant)
        duties = [slope * omega for omega in demanded]
    else:  # pragma: no cover - enum is closed
        raise InvalidConfig(f"unknown controller {controller!r}")
    actual = WheelSpeeds(*(_plant_wheel_speed(plant, w, u) for w, u in zip(WHEELS, duties)))
    return forward_kinematics(actual, geometry)


def simulate_circle(
    plant: Optional[MotorParams],
    controller: ControllerKind,
    radius: float,
    geometry: ChassisGeometry,
    angular_speed: float = DEFAULT_ANGULAR_SPEED,
    duration: Optional[float] = None,
    dt: float = DEFAULT_DT,
    start: Optional[RobotPose] = None,
) -> TrajectoryLog:
    """Drive the commanded circle and log the resulting poses.

    The commanded body velocity is constant: forward speed
    ``radius * angular_speed`` plus yaw rate ``angular_speed``, which in
    ideal actuation traces a circle of the given radius about the world
    origin starting at ``(radius, 0)`` heading ``+y``.  ``duration``
    defaults to exactly one revolution and must cover at least one
    revolution when a yaw rate is commanded.  With ``angular_speed`` of
    zero, ``duration`` must be given explicitly.

    The pose log starts at t = 0 and steps by ``dt``; heading is
    integrated unwrapped and wrapped only in the reported poses.
    """
    if not (math.isfinite(radius) and radius > 0.0):
        raise InvalidConfig(f"radius must be positive, got {radius}")
    if not (math.isfinite(dt) and 0.0 < dt <= 0.5):
        raise InvalidConfig(f"dt must lie in (0, 0.5], got {dt}")
    if not math.isfinite(angular_speed):
        raise InvalidConfig(f"angular_speed must be finite, got {angular_speed}")
    if duration is None:
        if angular_speed == 0.0:
            raise InvalidConfig("duration is required when angular_speed is zero")
        duration = TWO_PI / abs(angular_speed)
    if not (math.isfinite(duration) and duration > 0.0):
        raise InvalidConfig(f"duration must be positive, got {duration}")
    if angular_speed != 0.0:
        one_rev = TWO_PI / abs(angular_speed)
        if duration < one_rev * (1.0 - 1e-9):
            raise InvalidConfig(
                f"duration {duration} s is shorter than one revolution ({one_rev:.6g} s)"
            )
    if not isinstance(controller, ControllerKind):
        raise InvalidConfig(f"controller must be a ControllerKind, got {controller!r}")

    desired = BodyVelocity(vx=radius * angular_speed, vy=0.0, wz=angular_speed)
    actual = _actual_body_velocity(plant, controller, desired, geometry)

    if start is None:
        start = RobotPose(radius, 0.0, math.pi / 2.0)

    steps = int(math.floor(duration / dt + 1e-9))
    ks = np.arange(steps + 1)
    thetas = start.theta + (actual.wz * dt) * ks
    cos_t, sin_t = np.cos(thetas[:-1]), np.sin(thetas[:-1])
    dx = (actual.vx * cos_t - actual.vy * sin_t) * dt
    dy = (actual.vx * sin_t + actual.vy * cos_t) * dt
    xs = start.x + np.concatenate([[0.0], np.cumsum(dx)])
    ys = start.y + np.concatenate([[0.0], np.cumsum(dy)])

    entries = tuple(
        (k * dt, RobotPose(float(xs[k]), float(ys[k]), float(thetas[k])))
        for k in range(steps + 1)
    )
    return TrajectoryLog(dt=dt, entries=entries)


def rms_radial_deviation(log: TrajectoryLog, radius: float, center=(0.0, 0.0)) -> float:
    """Root-mean-square of (distance from center - radius) over the log."""
    if not log.entries:
        raise EmptyLog("cannot measure deviation of an empty trajectory")
    positions = log.positions()
    dist = np.hypot(positions[:, 0] - center[0], positions[:, 1] - center[1])
    return float(np.sqrt(np.mean((dist - radius) ** 2)))


def format_comparison(
    with_log: TrajectoryLog,
    without_log: TrajectoryLog,
    radius: float,
    center=(0.0, 0.0),
) -> str:
    """Human-readable summary of a calibrated/uncalibrated pair of runs."""
    rms_with = rms_radial_deviation(with_log, radius, center)
    rms_without = rms_radial_deviation(without_log, radius, center)
    ratio = rms_with / rms_without if rms_without > 0.0 else math.inf
    return "\n".join(
        [
            f"circle radius: {radius:g} m",
            f"with_sysid RMS radial deviation: {rms_with:.6g} m",
            f"without_sysid RMS radial deviation: {rms_without:.6g} m",
            f"ratio (with/without): {ratio:.6g}",
        ]
    )


def save_trajectory(path, log: TrajectoryLog) -> None:
    """Write ``t,x,y,theta`` CSV rows (gnuplot-friendly: `set datafile separator ','`)."""
    lines = ["t,x,y,theta"]
    for t, pose in log.entries:
        lines.append(f"{t!r},{pose.x!r},{pose.y!r},{pose.theta!r}")
    Path(path).write_text("".join(line + "\n" for line in lines))


def load_trajectory(path) -> TrajectoryLog:
    text = Path(path).read_text()
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or lines[0].strip() != "t,x,y,theta":
        raise ParseError(f"{path}: expected header 't,x,y,theta'")
    entries = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 4:
            raise ParseError(f"{path}: line {lineno}: expected 4 fields, got {len(parts)}")
        try:
            t, x, y, theta = (float(p) for p in parts)
        except ValueError as exc:
            raise ParseError(f"{path}: line {lineno}: {exc}") from exc
        entries.append((t, RobotPose(x, y, theta)))
    dt = entries[1][0] - entries[0][0] if len(entries) >= 2 else 0.0
    try:
        return TrajectoryLog(dt=dt, entries=tuple(entries))
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
