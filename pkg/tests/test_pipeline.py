import json
import random
import sys
from dataclasses import replace

import numpy as np
import pytest

from conftest import lying_pose, standing_pose
from fallbot.errors import AdapterUnavailable, EmptyCandidates, InvalidConfig
from fallbot.falldet import MlpWeights, save_detections
from fallbot.pipeline import (
    CandidateResult,
    FallReport,
    PersonVerdict,
    classify_detections,
    emit_report,
    pov_homographies,
    report_to_json,
    run_pipeline,
    select_best_candidate,
)
from fallbot.projective import Homography, apply_homography
from fallbot.raster import save_image

TS = "2026-08-16T12:00:00Z"


def with_confidence(det, value):
    return replace(det, confidence=value)


def zero_weights():
    """All-zero full-size network: both logits equal, p_fall exactly 0.5."""
    return MlpWeights(
        weights=tuple(np.zeros((a, b)) for a, b in ((34, 20), (20, 20), (20, 2))),
        biases=tuple(np.zeros(b) for b in (20, 20, 2)),
    )


def candidate(h, confidences):
    dets = tuple(with_confidence(standing_pose(), c) for c in confidences)
    return CandidateResult(h=h, detections=dets)


def keypoint_file(tmp_path, name, detections):
    path = tmp_path / name
    save_detections(path, detections)
    return path


class TestCandidateResult:
    def test_best_confidence_is_max(self):
        assert candidate(1.0, [0.2, 0.7, 0.4]).best_confidence == 0.7

    def test_empty_candidate_scores_zero(self):
        assert CandidateResult(h=1.0, detections=()).best_confidence == 0.0

    def test_distance_must_be_positive(self):
        for h in (0.0, -1.0, float("nan")):
            with pytest.raises(ValueError):
                CandidateResult(h=h, detections=())

    def test_detections_type_checked(self):
        with pytest.raises(TypeError):
            CandidateResult(h=1.0, detections=("not a detection",))


class TestSelection:
    def test_single_candidate_is_returned(self):
        only = candidate(2.0, [0.5])
        assert select_best_candidate([only]) is only

    def test_tie_broken_by_smaller_distance(self):
        far = candidate(2.0, [0.9])
        near = candidate(1.0, [0.9])
        assert select_best_candidate([far, near]) is near
        assert select_best_candidate([near, far]) is near

    def test_max_confidence_wins(self):
        pool = [candidate(1.0, [0.3]), candidate(2.0, [0.8]), candidate(3.0, [0.5])]
        assert select_best_candidate(pool).best_confidence == 0.8

    def test_order_invariance(self):
        pool = [candidate(float(i + 1), [c]) for i, c in enumerate([0.3, 0.8, 0.5, 0.8])]
        rng = random.Random(3)
        for _ in range(20):
            shuffled = pool[:]
            rng.shuffle(shuffled)
            chosen = select_best_candidate(shuffled)
            assert (chosen.best_confidence, chosen.h) == (0.8, 2.0)

    def test_positive_scaling_does_not_change_winner(self):
        confidences = [0.3, 0.8, 0.5]
        for scale in (1.0, 0.5, 0.125):
            pool = [
                candidate(float(i + 1), [c * scale]) for i, c in enumerate(confidences)
            ]
            assert select_best_candidate(pool).h == 2.0

    def test_empty_pool_rejected(self):
        with pytest.raises(EmptyCandidates):
            select_best_candidate([])


class TestClassify:
    def test_rules_only(self):
        verdicts, alarm = classify_detections([standing_pose(), lying_pose()])
        assert [v.rules_fall for v in verdicts] == [False, True]
        assert [v.mlp_p_fall for v in verdicts] == [None, None]
        assert {v.method for v in verdicts} == {"rules"}
        assert alarm

    def test_standing_only_is_quiet(self):
        verdicts, alarm = classify_detections([standing_pose()])
        assert not alarm and not verdicts[0].rules_fall

    def test_mlp_method_thresholds_probability(self):
        # All-zero weights leave the two logits equal, so p_fall is exactly
        # one half and the threshold decides the verdict on its own.
        weights = zero_weights()
        verdicts, alarm = classify_detections(
            [standing_pose()], method="mlp", weights=weights, mlp_threshold=0.4
        )
        assert alarm and verdicts[0].mlp_p_fall == pytest.approx(0.5)
        _, alarm = classify_detections(
            [standing_pose()], method="mlp", weights=weights, mlp_threshold=0.6
        )
        assert not alarm

    def test_both_is_a_disjunction(self):
        weights = zero_weights()
        # Rules say fall, network (p=0.5, threshold .6) says no: still a fall.
        verdicts, alarm = classify_detections(
            [lying_pose()], method="both", weights=weights, mlp_threshold=0.6
        )
        assert alarm and verdicts[0].rules_fall and verdicts[0].mlp_p_fall == pytest.approx(0.5)
        # Rules say no, network threshold .4 says yes: also a fall.
        _, alarm = classify_detections(
            [standing_pose()], method="both", weights=weights, mlp_threshold=0.4
        )
        assert alarm

    def test_mlp_needs_weights(self):
        for method in ("mlp", "both"):
            with pytest.raises(InvalidConfig, match="weights"):
                classify_detections([standing_pose()], method=method)

    def test_bad_method_and_threshold(self):
        with pytest.raises(InvalidConfig, match="method"):
            classify_detections([], method="oracle")
        weights = zero_weights()
        for bad in (0.0, 1.0, -0.2):
            with pytest.raises(InvalidConfig, match="threshold"):
                classify_detections([], method="mlp", weights=weights, mlp_threshold=bad)


class TestRunPipelineFromFiles:
    def test_standing_report_is_quiet(self, tmp_path):
        path = keypoint_file(tmp_path, "standing.jsonl", [standing_pose()])
        report = run_pipeline(candidate_files=[(1.5, path)], timestamp=TS)
        assert report.alarm is False
        assert report.no_person is False
        assert report.candidate_h == 1.5
        assert report.timestamp == TS
        assert report.source == "standing.jsonl"
        assert len(report.persons) == 1
        person = report.persons[0]
        assert person.method == "rules"
        assert person.rules_fall is False
        assert person.mlp_p_fall is None

    def test_lying_report_alarms(self, tmp_path):
        path = keypoint_file(tmp_path, "lying.jsonl", [lying_pose()])
        report = run_pipeline(candidate_files=[(1.5, path)], timestamp=TS)
        assert report.alarm is True
        assert report.persons[0].rules_fall is True

    def test_detection_outranks_empty_candidate(self, tmp_path):
        empty = keypoint_file(tmp_path, "empty.jsonl", [])
        occupied = keypoint_file(tmp_path, "occupied.jsonl", [standing_pose()])
        report = run_pipeline(
            candidate_files=[(1.0, empty), (2.5, occupied)], timestamp=TS
        )
        assert report.candidate_h == 2.5
        assert report.no_person is False

    def test_all_empty_candidates(self, tmp_path):
        a = keypoint_file(tmp_path, "a.jsonl", [])
        b = keypoint_file(tmp_path, "b.jsonl", [])
        report = run_pipeline(candidate_files=[(2.0, a), (1.0, b)], timestamp=TS)
        assert report.no_person is True
        assert report.alarm is False
        assert report.persons == ()
        assert report.candidate_h == 1.0  # tie on zero confidence -> nearest plane

    def test_source_override(self, tmp_path):
        path = keypoint_file(tmp_path, "x.jsonl", [standing_pose()])
        report = run_pipeline(
            candidate_files=[(1.0, path)], source="frame_000017", timestamp=TS
        )
        assert report.source == "frame_000017"

    def test_default_timestamp_is_rfc3339_utc(self, tmp_path):
        path = keypoint_file(tmp_path, "x.jsonl", [standing_pose()])
        report = run_pipeline(candidate_files=[(1.0, path)])
        assert len(report.timestamp) == len("2026-01-01T00:00:00Z")
        assert report.timestamp.endswith("Z") and report.timestamp[10] == "T"

    def test_deterministic_bytes(self, tmp_path):
        path = keypoint_file(tmp_path, "x.jsonl", [lying_pose(), standing_pose()])
        first = run_pipeline(candidate_files=[(1.0, path)], timestamp=TS)
        second = run_pipeline(candidate_files=[(1.0, path)], timestamp=TS)
        assert report_to_json(first) == report_to_json(second)

    def test_no_input_rejected(self):
        with pytest.raises(InvalidConfig, match="no candidate input"):
            run_pipeline()

    def test_empty_candidate_list_rejected(self):
        with pytest.raises(EmptyCandidates):
            run_pipeline(candidate_files=[], timestamp=TS)

    def test_both_modes_rejected(self, tmp_path):
        path = keypoint_file(tmp_path, "x.jsonl", [standing_pose()])
        with pytest.raises(InvalidConfig, match="not both"):
            run_pipeline(candidate_files=[(1.0, path)], image="img.png")

    def test_mlp_without_weights_rejected(self, tmp_path):
        path = keypoint_file(tmp_path, "x.jsonl", [standing_pose()])
        with pytest.raises(InvalidConfig, match="weights"):
            run_pipeline(candidate_files=[(1.0, path)], method="mlp")


def fake_adapter(tmp_path, detections, name="fake_adapter.py"):
    """A stand-in pose extractor: copies a prepared JSONL to --output."""
    template = keypoint_file(tmp_path, "template.jsonl", detections)
    script = tmp_path / name
    script.write_text(
        "import argparse, shutil\n"
        "p = argparse.ArgumentParser()\n"
        "p.add_argument('--input', required=True)\n"
        "p.add_argument('--output', required=True)\n"
        "a = p.parse_args()\n"
        f"shutil.copy({str(template)!r}, a.output)\n"
    )
    return [sys.executable, str(script)]


class TestRunPipelineFromImage:
    @pytest.fixture()
    def image_path(self, tmp_path):
        rng = np.random.default_rng(5)
        path = tmp_path / "frame.png"
        save_image(path, rng.integers(0, 256, size=(32, 32), dtype=np.uint8))
        return path

    def test_image_mode_end_to_end(self, tmp_path, image_path):
        cmd = fake_adapter(tmp_path, [lying_pose()])
        work = tmp_path / "work"
        work.mkdir()
        report = run_pipeline(
            image=image_path,
            homographies=[(1.0, Homography(np.eye(3)))],
            adapter_cmd=cmd,
            timestamp=TS,
            workdir=work,
        )
        assert report.alarm is True
        assert report.source == "frame.png"
        assert (work / "candidate_00.png").exists()
        assert (work / "candidate_00.jsonl").exists()

    def test_temp_workdir_by_default(self, tmp_path, image_path):
        cmd = fake_adapter(tmp_path, [standing_pose()])
        report = run_pipeline(
            image=image_path,
            homographies=[(1.0, Homography(np.eye(3)))],
            adapter_cmd=cmd,
            timestamp=TS,
        )
        assert report.alarm is False and len(report.persons) == 1

    def test_image_without_adapter(self, image_path):
        with pytest.raises(AdapterUnavailable, match="keypoint files"):
            run_pipeline(image=image_path, homographies=[(1.0, Homography(np.eye(3)))])

    def test_image_without_homographies(self, image_path):
        with pytest.raises(InvalidConfig, match="homography"):
            run_pipeline(image=image_path, adapter_cmd=["true"])

    def test_missing_adapter_binary(self, image_path):
        with pytest.raises(AdapterUnavailable, match="cannot run"):
            run_pipeline(
                image=image_path,
                homographies=[(1.0, Homography(np.eye(3)))],
                adapter_cmd=["/nonexistent/pose-extractor"],
            )

    def test_failing_adapter_surfaces_status(self, tmp_path, image_path):
        script = tmp_path / "broken.py"
        script.write_text("import sys; sys.stderr.write('model file missing\\n'); sys.exit(3)\n")
        with pytest.raises(AdapterUnavailable, match="status 3"):
            run_pipeline(
                image=image_path,
                homographies=[(1.0, Homography(np.eye(3)))],
                adapter_cmd=[sys.executable, str(script)],
            )


class TestReportJson:
    def sample_report(self):
        return FallReport(
            timestamp=TS,
            source="x.jsonl",
            candidate_h=1.5,
            persons=(
                PersonVerdict(bbox=(1.0, 2.0, 3.0, 4.0), rules_fall=True,
                              mlp_p_fall=None, method="rules"),
            ),
            alarm=True,
            no_person=False,
        )

    def test_single_line_stable_fields(self):
        line = report_to_json(self.sample_report())
        assert "\n" not in line
        doc = json.loads(line)
        assert list(doc) == [
            "timestamp", "source", "candidate_h", "persons", "alarm", "no_person",
        ]
        assert list(doc["persons"][0]) == ["bbox", "rules_fall", "mlp_p_fall", "method"]
        assert doc["persons"][0]["bbox"] == [1.0, 2.0, 3.0, 4.0]
        assert doc["persons"][0]["mlp_p_fall"] is None
        assert doc["alarm"] is True

    def test_stdout_sink(self, capsys):
        report = self.sample_report()
        assert emit_report(report) is None
        assert capsys.readouterr().out == report_to_json(report) + "\n"

    def test_file_sink_idempotent(self, tmp_path):
        report = self.sample_report()
        target = tmp_path / "report.json"
        assert emit_report(report, target) == target
        first = target.read_bytes()
        assert emit_report(report, target) == target
        assert target.read_bytes() == first
        assert first.decode().strip() == report_to_json(report)

    def test_spool_writes_alarms_only(self, tmp_path):
        spool = tmp_path / "alerts"
        spool.mkdir()
        report = self.sample_report()
        path = emit_report(report, spool)
        assert path == spool / f"fall_{TS}.json"
        assert path.exists()
        quiet = FallReport(
            timestamp=TS, source="x", candidate_h=1.0, persons=(),
            alarm=False, no_person=True,
        )
        assert emit_report(quiet, spool) is None
        assert sorted(p.name for p in spool.iterdir()) == [f"fall_{TS}.json"]

    def test_spool_reemit_overwrites_identically(self, tmp_path):
        spool = tmp_path / "alerts"
        spool.mkdir()
        report = self.sample_report()
        path = emit_report(report, spool)
        blob = path.read_bytes()
        assert emit_report(report, spool) == path
        assert path.read_bytes() == blob


class TestPovHomographies:
    K = np.array([[700.0, 0.0, 320.0], [0.0, 700.0, 240.0], [0.0, 0.0, 1.0]])

    def test_count_and_ordering(self):
        pairs = pov_homographies(self.K, 1.0, 3.0, count=5)
        distances = [d for d, _ in pairs]
        assert distances == pytest.approx(np.linspace(1.0, 3.0, 5))

    def test_principal_ray_shifts_down_by_parallax(self):
        # A raised viewpoint sees the same subject lower in the frame by
        # exactly fy * lift / distance pixels along the principal ray.
        lift = 1.35
        for d, hom in pov_homographies(self.K, 1.0, 3.0, count=3, lift=lift):
            u, v = apply_homography(hom, (320.0, 240.0))
            assert u == pytest.approx(320.0, abs=1e-9)
            assert v == pytest.approx(240.0 + 700.0 * lift / d, rel=1e-12)

    def test_zero_lift_is_identity(self):
        for _, hom in pov_homographies(self.K, 1.0, 2.0, count=2, lift=0.0):
            assert np.allclose(hom.matrix, np.eye(3), atol=1e-15)
