"""The ``fallbot`` command line.

Subcommand tree::

    homography  compute | sample | warp | pitch
    kinematics  inverse | forward
    sysid       fit | pwm | simulate-plant
    falldet     rules | mlp-infer | mlp-train
    simulate    circle
    pipeline    run

Common flags on every subcommand: ``--config`` (camera/chassis settings
file), ``--output``, ``--seed``, ``--format json|csv``.  Results print to
stdout unless ``--output`` names a file.

Exit codes are a stable contract. 0 means success (for ``pipeline run``:
no fall), 10 means a fall was detected, and anything above 10 is an
error: 11 bad configuration or usage, 12 unparseable or malformed input
data, 13 pose extractor unavailable, 14 a domain error from the toolkit
(singular map, unfittable data, ...), 15 unexpected failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import shlex
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import camera_from_config, chassis_from_config, parse_config
from .errors import (
    AdapterUnavailable,
    InvalidConfig,
    MalformedDetection,
    ParseError,
    ShapeMismatch,
    ToolkitError,
)
from .falldet import (
    DEFAULT_IMAGE_SIZE,
    SCORE_THRESHOLD,
    TrainConfig,
    load_detections,
    load_weights,
    mlp_forward,
    mlp_train,
    rules_fall,
    save_weights,
)
from .kinematics import WHEELS, BodyVelocity, WheelSpeeds, forward_kinematics, inverse_kinematics
from .pipeline import DEFAULT_MLP_THRESHOLD, emit_report, run_pipeline
from .projective import (
    Plane,
    load_homography,
    pitch_homography,
    plane_homography,
    relative_pose,
    sample_homographies,
    save_homography,
)
from .raster import load_image, save_image, warp_image
from .simulator import (
    DEFAULT_ANGULAR_SPEED,
    DEFAULT_DT,
    ControllerKind,
    format_comparison,
    rms_radial_deviation,
    save_trajectory,
    simulate_circle,
)
from .sysid import fit, load_params, load_samples, reference_params, save_params
from .sysid import pwm_for_speed, speed_for_pwm

_DEFAULT_SIZE = f"{DEFAULT_IMAGE_SIZE[0]}x{DEFAULT_IMAGE_SIZE[1]}"

EXIT_OK = 0
EXIT_FALL = 10
EXIT_CONFIG = 11
EXIT_DATA = 12
EXIT_ADAPTER = 13
EXIT_TOOLKIT = 14
EXIT_UNEXPECTED = 15


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors honor the exit-code contract."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# --- small shared helpers -----------------------------------------------------

def _csv_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _render(records, fmt: str) -> str:
    """Records to text: a dict renders as one object/row, a list as many."""
    if fmt == "json":
        return json.dumps(records)
    rows = [records] if isinstance(records, dict) else list(records)
    buf = io.StringIO()
    writer = csv.writer(buf)
    if rows:
        keys = list(rows[0])
        writer.writerow(keys)
        for row in rows:
            writer.writerow([_csv_cell(row[k]) for k in keys])
    return buf.getvalue().rstrip("\n")


def _emit(text: str, output: Optional[str]) -> None:
    if output is None:
        print(text)
    else:
        Path(output).write_text(text + "\n", encoding="utf-8")


def _load_config(args) -> dict:
    if args.config is None:
        raise InvalidConfig("this command needs --config <settings file>")
    return parse_config(args.config)


def _camera(args):
    return camera_from_config(_load_config(args))


def _chassis(args):
    return chassis_from_config(_load_config(args))


def _plant(path: Optional[str]):
    return load_params(path) if path else reference_params()


def _parse_image_size(text: str):
    try:
        w, h = text.lower().split("x")
        return (int(w), int(h))
    except ValueError:
        raise InvalidConfig(f"--image-size must look like 640x480, got {text!r}") from None


def _parse_candidate(text: str):
    """Split an 'H=PATH' candidate argument into (distance, path)."""
    distance, sep, path = text.partition("=")
    if not sep or not path:
        raise InvalidConfig(f"expected DISTANCE=PATH, got {text!r}")
    try:
        return float(distance), path
    except ValueError:
        raise InvalidConfig(f"candidate distance {distance!r} is not a number") from None


def _homography_text(h) -> str:
    return "\n".join(" ".join(repr(float(x)) for x in row) for row in h.matrix)


def _emit_homography(h, output: Optional[str]) -> None:
    if output is None:
        print(_homography_text(h))
    else:
        save_homography(output, h)


# --- homography ---------------------------------------------------------------

def cmd_homography_compute(args) -> int:
    cam1 = _camera(args)
    cam2 = camera_from_config(parse_config(args.camera2))
    r, t = relative_pose(cam1, cam2)
    plane = Plane.from_vector(np.array(args.normal), args.distance)
    h = plane_homography(cam1.intrinsics, cam2.intrinsics, r, t, plane)
    _emit_homography(h, args.output)
    return EXIT_OK


def cmd_homography_sample(args) -> int:
    cam1 = _camera(args)
    cam2 = camera_from_config(parse_config(args.camera2))
    pairs = sample_homographies(
        cam1, cam2, np.array(args.normal), args.min_distance, args.max_distance, args.count
    )
    records = [
        {"h": d, "matrix": [float(x) for x in hom.matrix.ravel()]} for d, hom in pairs
    ]
    if args.format == "csv":
        flat = [
            {"h": rec["h"], **{f"m{i // 3}{i % 3}": v for i, v in enumerate(rec["matrix"])}}
            for rec in records
        ]
        _emit(_render(flat, "csv"), args.output)
    else:
        _emit(_render(records, "json"), args.output)
    return EXIT_OK


def cmd_homography_warp(args) -> int:
    if args.output is None:
        raise InvalidConfig("warp needs --output <image path>")
    h = load_homography(args.map)
    if args.inverse:
        h = h.inverse()
    save_image(args.output, warp_image(load_image(args.input), h))
    return EXIT_OK


def cmd_homography_pitch(args) -> int:
    cam = _camera(args)
    h = pitch_homography(cam.intrinsics, args.theta, args.distance)
    _emit_homography(h, args.output)
    return EXIT_OK


# --- kinematics ---------------------------------------------------------------

def cmd_kinematics_inverse(args) -> int:
    speeds = inverse_kinematics(BodyVelocity(args.vx, args.vy, args.wz), _chassis(args))
    record = {"fl": speeds.fl, "fr": speeds.fr, "rl": speeds.rl, "rr": speeds.rr}
    _emit(_render(record, args.format), args.output)
    return EXIT_OK


def cmd_kinematics_forward(args) -> int:
    v = forward_kinematics(WheelSpeeds(args.fl, args.fr, args.rl, args.rr), _chassis(args))
    record = {"vx": v.vx, "vy": v.vy, "wz": v.wz}
    _emit(_render(record, args.format), args.output)
    return EXIT_OK


# --- sysid --------------------------------------------------------------------

def cmd_sysid_fit(args) -> int:
    result = fit(load_samples(args.input))
    if args.params_out:
        save_params(args.params_out, result.params)
    records = [
        {
            "wheel": wheel,
            "direction": direction,
            "b": result.params.coefficients[(wheel, direction)][0],
            "c": result.params.coefficients[(wheel, direction)][1],
            "residual_rms": result.residual_rms[(wheel, direction)],
        }
        for wheel, direction in result.params.groups()
    ]
    for (wheel, direction), reason in sorted(result.omitted.items()):
        print(f"omitted {wheel}/{direction}: {reason}", file=sys.stderr)
    _emit(_render(records, args.format), args.output)
    return EXIT_OK


def cmd_sysid_pwm(args) -> int:
    params = _plant(args.params)
    record = {
        "wheel": args.wheel,
        "omega": args.omega,
        "pwm": pwm_for_speed(params, args.wheel, args.omega),
    }
    _emit(_render(record, args.format), args.output)
    return EXIT_OK


def cmd_sysid_simulate_plant(args) -> int:
    params = _plant(args.params)
    record = {
        "wheel": args.wheel,
        "pwm": args.pwm,
        "omega": speed_for_pwm(params, args.wheel, args.pwm),
    }
    _emit(_render(record, args.format), args.output)
    return EXIT_OK


# --- falldet ------------------------------------------------------------------

def cmd_falldet_rules(args) -> int:
    records = []
    for i, det in enumerate(load_detections(args.input)):
        v = rules_fall(det, score_threshold=args.score_threshold)
        records.append(
            {
                "index": i,
                "fall": v.fall,
                "degraded": v.degraded,
                "posture_collapsed": v.posture_collapsed,
                "box_wider_than_tall": v.box_wider_than_tall,
                "torso_length": v.torso_length,
            }
        )
    _emit(_render(records, args.format), args.output)
    return EXIT_OK


def cmd_falldet_mlp_infer(args) -> int:
    weights = load_weights(args.weights)
    size = _parse_image_size(args.image_size)
    records = []
    for i, det in enumerate(load_detections(args.input)):
        p_fall, _ = mlp_forward(weights, det, image_size=size, score_threshold=args.score_threshold)
        records.append({"index": i, "p_fall": float(p_fall), "fall": p_fall >= args.threshold})
    _emit(_render(records, args.format), args.output)
    return EXIT_OK


def cmd_falldet_mlp_train(args) -> int:
    if args.weights_out is None:
        raise InvalidConfig("mlp-train needs --weights-out <file> for the trained network")
    detections = load_detections(args.input)
    pairs = [(det, det.label) for det in detections]
    config = TrainConfig(
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed if args.seed is not None else 0,
    )
    size = _parse_image_size(args.image_size)
    result = mlp_train(pairs, config, image_size=size, score_threshold=args.score_threshold)
    save_weights(args.weights_out, result.weights)
    record = {
        "examples": len(pairs),
        "epochs": args.epochs,
        "final_loss": result.final_loss,
        "final_accuracy": result.final_accuracy,
        "weights": str(args.weights_out),
    }
    _emit(_render(record, args.format), args.output)
    return EXIT_OK


# --- simulate -----------------------------------------------------------------

def cmd_simulate_circle(args) -> int:
    geometry = _chassis(args)
    plant = _plant(args.params)
    kwargs = dict(
        angular_speed=args.angular_speed,
        duration=args.duration,
        dt=args.dt,
    )
    if args.compare:
        with_log = simulate_circle(plant, ControllerKind.WITH_SYSID, args.radius, geometry, **kwargs)
        without_log = simulate_circle(
            plant, ControllerKind.WITHOUT_SYSID, args.radius, geometry, **kwargs
        )
        _emit(format_comparison(with_log, without_log, args.radius), args.output)
        return EXIT_OK
    if args.controller == "ideal":
        log = simulate_circle(None, ControllerKind.WITH_SYSID, args.radius, geometry, **kwargs)
    else:
        log = simulate_circle(plant, ControllerKind(args.controller), args.radius, geometry, **kwargs)
    if args.output:
        save_trajectory(args.output, log)
    record = {
        "controller": args.controller,
        "radius": args.radius,
        "angular_speed": args.angular_speed,
        "dt": args.dt,
        "entries": len(log),
        "rms_radial_deviation": rms_radial_deviation(log, args.radius),
    }
    print(_render(record, args.format))
    return EXIT_OK


# --- pipeline -----------------------------------------------------------------

def cmd_pipeline_run(args) -> int:
    weights = load_weights(args.weights) if args.weights else None
    candidate_files = [_parse_candidate(c) for c in args.candidate] if args.candidate else None
    homographies = None
    if args.map:
        homographies = []
        for spec in args.map:
            distance, path = _parse_candidate(spec)
            homographies.append((distance, load_homography(path)))
    report = run_pipeline(
        candidate_files=candidate_files,
        image=args.image,
        homographies=homographies,
        adapter_cmd=shlex.split(args.adapter) if args.adapter else None,
        method=args.method,
        weights=weights,
        mlp_threshold=args.mlp_threshold,
        image_size=_parse_image_size(args.image_size),
        score_threshold=args.score_threshold,
        source=args.source,
        timestamp=args.timestamp,
    )
    emit_report(report, args.output)
    return EXIT_FALL if report.alarm else EXIT_OK


# --- parser -------------------------------------------------------------------

def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="camera/chassis settings file (key = value lines)")
    common.add_argument("--output", help="write the result here instead of stdout")
    common.add_argument("--seed", type=int, help="seed for any randomized step")
    common.add_argument(
        "--format", choices=("json", "csv"), default="json", help="stdout format for tabular results"
    )

    parser = _Parser(prog="fallbot", description=__doc__, parents=[common])
    parser.add_argument("--version", action="version", version=f"fallbot {__version__}")
    top = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    # homography
    homography = top.add_parser("homography", parents=[common], help="pixel-transfer maps")
    hsub = homography.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = hsub.add_parser("compute", parents=[common], help="map between two configured cameras")
    p.add_argument("--camera2", required=True, help="settings file for the second camera")
    p.add_argument("--distance", type=float, required=True, help="plane offset along the normal, m")
    p.add_argument("--normal", type=float, nargs=3, default=[0.0, 0.0, 1.0], metavar="N")
    p.set_defaults(func=cmd_homography_compute)

    p = hsub.add_parser("sample", parents=[common], help="candidate maps over a distance range")
    p.add_argument("--camera2", required=True)
    p.add_argument("--min-distance", type=float, required=True)
    p.add_argument("--max-distance", type=float, required=True)
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--normal", type=float, nargs=3, default=[0.0, 0.0, 1.0], metavar="N")
    p.set_defaults(func=cmd_homography_sample)

    p = hsub.add_parser("warp", parents=[common], help="resample an image under a map")
    p.add_argument("--input", required=True, help="source image (PNG/PGM/PPM)")
    p.add_argument("--map", required=True, help="homography file (9 numbers)")
    p.add_argument("--inverse", action="store_true", help="apply the inverse map")
    p.set_defaults(func=cmd_homography_warp)

    p = hsub.add_parser("pitch", parents=[common], help="map for a pitched copy of one camera")
    p.add_argument("--theta", type=float, required=True, help="pitch angle, degrees")
    p.add_argument("--distance", type=float, required=True, help="pivot distance, m")
    p.set_defaults(func=cmd_homography_pitch)

    # kinematics
    kinematics = top.add_parser("kinematics", parents=[common], help="mecanum drive conversions")
    ksub = kinematics.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = ksub.add_parser("inverse", parents=[common], help="body velocity to wheel speeds")
    p.add_argument("--vx", type=float, default=0.0, help="forward speed, m/s")
    p.add_argument("--vy", type=float, default=0.0, help="leftward speed, m/s")
    p.add_argument("--wz", type=float, default=0.0, help="yaw rate, rad/s")
    p.set_defaults(func=cmd_kinematics_inverse)

    p = ksub.add_parser("forward", parents=[common], help="wheel speeds to body velocity")
    for wheel in ("fl", "fr", "rl", "rr"):
        p.add_argument(f"--{wheel}", type=float, required=True, help=f"{wheel.upper()} speed, rad/s")
    p.set_defaults(func=cmd_kinematics_forward)

    # sysid
    sysid = top.add_parser("sysid", parents=[common], help="motor calibration")
    ssub = sysid.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = ssub.add_parser("fit", parents=[common], help="fit duty/speed coefficients from a CSV log")
    p.add_argument("--input", required=True, help="samples CSV with header wheel,pwm,omega")
    p.add_argument("--params-out", help="also save fitted coefficients to this file")
    p.set_defaults(func=cmd_sysid_fit)

    p = ssub.add_parser("pwm", parents=[common], help="duty cycle for a wheel speed")
    p.add_argument("--wheel", choices=WHEELS, required=True)
    p.add_argument("--omega", type=float, required=True, help="wheel speed, velocity units")
    p.add_argument("--params", help="coefficients file (default: shipped reference fit)")
    p.set_defaults(func=cmd_sysid_pwm)

    p = ssub.add_parser("simulate-plant", parents=[common], help="wheel speed for a duty cycle")
    p.add_argument("--wheel", choices=WHEELS, required=True)
    p.add_argument("--pwm", type=float, required=True)
    p.add_argument("--params", help="coefficients file (default: shipped reference fit)")
    p.set_defaults(func=cmd_sysid_simulate_plant)

    # falldet
    falldet = top.add_parser("falldet", parents=[common], help="fall classification")
    fsub = falldet.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = fsub.add_parser("rules", parents=[common], help="posture rules over a keypoint file")
    p.add_argument("--input", required=True, help="detections, JSON lines")
    p.add_argument("--score-threshold", type=float, default=SCORE_THRESHOLD)
    p.set_defaults(func=cmd_falldet_rules)

    p = fsub.add_parser("mlp-infer", parents=[common], help="network probabilities per detection")
    p.add_argument("--input", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--threshold", type=float, default=DEFAULT_MLP_THRESHOLD)
    p.add_argument("--score-threshold", type=float, default=SCORE_THRESHOLD)
    p.add_argument("--image-size", default=_DEFAULT_SIZE)
    p.set_defaults(func=cmd_falldet_mlp_infer)

    p = fsub.add_parser("mlp-train", parents=[common], help="train the network on labelled poses")
    p.add_argument("--input", required=True, help="labelled detections, JSON lines")
    p.add_argument("--weights-out", required=True, help="where to save the trained network")
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--score-threshold", type=float, default=SCORE_THRESHOLD)
    p.add_argument("--image-size", default=_DEFAULT_SIZE)
    p.set_defaults(func=cmd_falldet_mlp_train)

    # simulate
    simulate = top.add_parser("simulate", parents=[common], help="drive simulation")
    msub = simulate.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = msub.add_parser("circle", parents=[common], help="drive a circle on the calibrated plant")
    p.add_argument("--radius", type=float, required=True, help="circle radius, m")
    p.add_argument("--params", help="plant coefficients file (default: shipped reference fit)")
    p.add_argument(
        "--controller",
        choices=("with_sysid", "without_sysid", "ideal"),
        default="with_sysid",
        help="per-wheel calibration, shared linear gain, or a perfect plant",
    )
    p.add_argument("--angular-speed", type=float, default=DEFAULT_ANGULAR_SPEED, help="rad/s")
    p.add_argument("--duration", type=float, default=None, help="seconds (default: one lap)")
    p.add_argument("--dt", type=float, default=DEFAULT_DT, help="integration step, s")
    p.add_argument(
        "--compare",
        action="store_true",
        help="run both controllers and print the deviation summary",
    )
    p.set_defaults(func=cmd_simulate_circle)

    # pipeline
    pipeline = top.add_parser("pipeline", parents=[common], help="end-to-end fall detection")
    psub = pipeline.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = psub.add_parser("run", parents=[common], help="evaluate candidates and emit a report")
    p.add_argument(
        "--candidate",
        action="append",
        metavar="H=POSES.jsonl",
        help="plane distance and keypoint file; repeatable",
    )
    p.add_argument("--image", help="raw frame to warp per candidate (needs --map and --adapter)")
    p.add_argument(
        "--map",
        action="append",
        metavar="H=HOMOGRAPHY.txt",
        help="plane distance and homography file for image input; repeatable",
    )
    p.add_argument("--adapter", help="pose-extractor command, e.g. 'pose-adapter extract'")
    p.add_argument("--method", choices=("rules", "mlp", "both"), default="rules")
    p.add_argument("--weights", help="trained network file (for mlp/both)")
    p.add_argument("--mlp-threshold", type=float, default=DEFAULT_MLP_THRESHOLD)
    p.add_argument("--score-threshold", type=float, default=SCORE_THRESHOLD)
    p.add_argument("--image-size", default=_DEFAULT_SIZE)
    p.add_argument("--source", help="source id recorded in the report")
    p.add_argument("--timestamp", help="inject the report timestamp (RFC 3339)")
    p.set_defaults(func=cmd_pipeline_run)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidConfig as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, MalformedDetection, ShapeMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except AdapterUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ADAPTER
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOOLKIT
    except Exception as exc:  # noqa: BLE001 - last-resort boundary for exit code 15
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
