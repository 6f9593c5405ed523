"""Per-wheel calibration between drive duty cycle and wheel speed.

Each wheel, in each spin direction, follows an inverse speed model

    duty = b / omega + c

with its own coefficients. Fitting the coefficients from logged
(duty, speed) samples and inverting the model at runtime lets a controller
ask for a wheel speed and get the duty cycle that actually produces it.

Wheel speeds here are whatever unit the encoder firmware reports. For the
shipped reference calibration (:func:`reference_params`) that unit is an
opaque velocity count — see data/reference_motor_params.txt — so treat b
and c as empirical numbers rather than quantities in rad/s.
"""

from __future__ import annotations

import csv
import importlib.resources
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .errors import (
    DegenerateRegressor,
    InsufficientData,
    MissingParams,
    ParseError,
    SingularInversion,
)
from .kinematics import WHEELS

POSITIVE = "positive"
NEGATIVE = "negative"
DIRECTIONS = (POSITIVE, NEGATIVE)

# Drive commands are signed 8-bit values.
PWM_LIMIT = 255.0
# Speeds smaller than this are treated as a stop request (the 1/omega model
# has a pole at zero, so tiny magnitudes are meaningless there).
OMEGA_DEADBAND = 1e-3
# How close a duty cycle may come to the model pole before inversion refuses.
POLE_EPS = 1e-9

_REFERENCE_FILE = "reference_motor_params.txt"


class SysIdSample(NamedTuple):
    """One logged calibration point: wheel id, duty cycle, measured speed."""

    wheel: str
    pwm: float
    omega: float


def _direction_of(value: float) -> str:
    return POSITIVE if value > 0 else NEGATIVE


@dataclass(frozen=True)
class MotorParams:
    """Fitted (b, c) coefficients keyed by (wheel, direction).

    A params set may be partial (e.g. only the positive direction was
    calibrated); lookups for missing groups raise MissingParams.
    """

    coefficients: Mapping[tuple[str, str], tuple[float, float]] = field(
        default_factory=dict
    )

    def __post_init__(self):
        clean = {}
        for key, (b, c) in dict(self.coefficients).items():
            wheel, direction = key
            if wheel not in WHEELS:
                raise ValueError(f"unknown wheel {wheel!r}")
            if direction not in DIRECTIONS:
                raise ValueError(f"unknown direction {direction!r}")
            b, c = float(b), float(c)
            if not (np.isfinite(b) and np.isfinite(c)):
                raise ValueError(f"non-finite coefficients for {wheel}/{direction}")
            if b == 0.0:
                raise ValueError(f"b must be nonzero for {wheel}/{direction}")
            if (direction == POSITIVE) != (b > 0.0):
                raise ValueError(
                    f"sign of b ({b!r}) contradicts direction {direction!r}"
                    f" for wheel {wheel}"
                )
            clean[(wheel, direction)] = (b, c)
        object.__setattr__(self, "coefficients", clean)

    def get(self, wheel: str, direction: str) -> tuple[float, float]:
        try:
            return self.coefficients[(wheel, direction)]
        except KeyError:
            raise MissingParams(f"no coefficients for {wheel}/{direction}") from None

    def groups(self):
        return sorted(self.coefficients)


def pwm_for_speed(
    params: MotorParams, wheel: str, omega: float, deadband: float = OMEGA_DEADBAND
) -> float:
    """Duty cycle that drives a wheel at the requested speed.

    Speeds inside the deadband return 0 (stop). The raw model value
    b/omega + c is clamped into [-PWM_LIMIT, PWM_LIMIT]. Note the raw value
    is monotone *decreasing* in speed for the positive direction whenever
    b > 0 — whether that matches physical intuition depends entirely on the
    encoder's speed unit, which this module treats as opaque.
    """
    if abs(omega) < deadband:
        return 0.0
    b, c = params.get(wheel, _direction_of(omega))
    raw = b / omega + c
    return float(min(max(raw, -PWM_LIMIT), PWM_LIMIT))


def speed_for_pwm(params: MotorParams, wheel: str, pwm: float) -> float:
    """Wheel speed the calibrated model predicts for a duty cycle.

    This is the plant-side inversion omega = b / (pwm - c); a duty of 0
    returns speed 0. Raises SingularInversion if pwm sits on the model pole.
    """
    if pwm == 0.0:
        return 0.0
    b, c = params.get(wheel, _direction_of(pwm))
    denom = pwm - c
    if abs(denom) <= POLE_EPS:
        raise SingularInversion(f"duty {pwm!r} sits on the model pole for {wheel}")
    return float(b / denom)


@dataclass(frozen=True)
class FitResult:
    """Outcome of :func:`fit`: coefficients, residuals, and omissions."""

    params: MotorParams
    residual_rms: Mapping[tuple[str, str], float]
    omitted: Mapping[tuple[str, str], str]


def fit(samples: Iterable[SysIdSample], deadband: float = OMEGA_DEADBAND) -> FitResult:
    """Least-squares fit of (b, c) per wheel and spin direction.

    Samples inside the speed deadband are discarded. Groups with fewer than
    two usable samples are omitted (with a reason) rather than fitted. The
    result is independent of sample order.

    Raises:
        DegenerateRegressor: a group's speeds all coincide, so b and c
            cannot be separated.
        InsufficientData: no group could be fitted at all.
    """
    groups: dict[tuple[str, str], list[SysIdSample]] = {}
    for sample in samples:
        if sample.wheel not in WHEELS:
            raise ValueError(f"unknown wheel {sample.wheel!r}")
        if abs(sample.omega) < deadband:
            continue
        key = (sample.wheel, _direction_of(sample.omega))
        groups.setdefault(key, []).append(sample)

    coefficients = {}
    residual_rms = {}
    omitted = {}
    for key in sorted(groups):
        rows = sorted(groups[key], key=lambda s: (s.omega, s.pwm))
        if len(rows) < 2:
            omitted[key] = f"only {len(rows)} usable sample(s), need 2"
            continue
        inv_omega = np.array([1.0 / s.omega for s in rows])
        duty = np.array([s.pwm for s in rows])
        if np.ptp(inv_omega) < 1e-12:
            raise DegenerateRegressor(
                f"all speeds coincide in group {key[0]}/{key[1]}"
            )
        design = np.column_stack([inv_omega, np.ones_like(inv_omega)])
        (b, c), *_ = np.linalg.lstsq(design, duty, rcond=None)
        coefficients[key] = (float(b), float(c))
        residual_rms[key] = float(np.sqrt(np.mean((design @ [b, c] - duty) ** 2)))

    if not coefficients:
        raise InsufficientData("no wheel/direction group had enough usable samples")
    return FitResult(MotorParams(coefficients), residual_rms, omitted)


# --- file formats ------------------------------------------------------------

def save_params(path, params: MotorParams) -> None:
    """Write coefficients as 'wheel direction b c' lines."""
    lines = ["# columns: wheel direction b c"]
    for (wheel, direction) in params.groups():
        b, c = params.coefficients[(wheel, direction)]
        lines.append(f"{wheel} {direction} {b!r} {c!r}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_params(path) -> MotorParams:
    """Read a coefficients file written by :func:`save_params`."""
    coefficients = {}
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) != 4:
                raise ParseError(f"{path}:{lineno}: expected 'wheel direction b c'")
            wheel, direction, b_str, c_str = parts
            try:
                pair = (float(b_str), float(c_str))
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad number") from None
            if (wheel, direction) in coefficients:
                raise ParseError(f"{path}:{lineno}: duplicate group {wheel}/{direction}")
            coefficients[(wheel, direction)] = pair
    return MotorParams(coefficients)


def save_samples(path, samples: Iterable[SysIdSample]) -> None:
    """Write calibration samples as CSV with header wheel,pwm,omega."""
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["wheel", "pwm", "omega"])
        for s in samples:
            writer.writerow([s.wheel, repr(float(s.pwm)), repr(float(s.omega))])


def load_samples(path) -> list[SysIdSample]:
    """Read a calibration CSV written by :func:`save_samples`."""
    out = []
    with open(path, "r", encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["wheel", "pwm", "omega"]:
            raise ParseError(f"{path}: expected header 'wheel,pwm,omega'")
        for row in reader:
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"{path}: row {reader.line_num}: expected 3 fields")
            wheel = row[0].strip()
            try:
                out.append(SysIdSample(wheel, float(row[1]), float(row[2])))
            except ValueError:
                raise ParseError(f"{path}: row {reader.line_num}: bad number") from None
    return out


def reference_params() -> MotorParams:
    """Calibration shipped with the package for the reference drivetrain."""
    resource = importlib.resources.files("fallbot").joinpath(
        f"data/{_REFERENCE_FILE}"
    )
    with importlib.resources.as_file(resource) as path:
        return load_params(path)
