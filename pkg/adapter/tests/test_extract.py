"""File-level behavior of extract_poses: batching, filtering, failures."""

import json

import pytest

from conftest import blank_array, figure_array, save_png, ultralytics_installed
from pose_adapter import extract_poses
from pose_adapter.errors import InvalidRequest, ModelUnavailable, UnreadableImage
from pose_adapter.schema import COCO_KEYPOINT_ORDER


def read_lines(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


class TestSingleImage:
    def test_blank_gives_empty_file(self, blank_image, tmp_path):
        out = tmp_path / "poses.jsonl"
        count = extract_poses(blank_image, out, backend="synthetic")
        assert count == 0
        assert out.exists()
        assert out.read_text() == ""

    def test_figure_gives_one_schema_line(self, standing_image, tmp_path):
        out = tmp_path / "poses.jsonl"
        count = extract_poses(standing_image, out, backend="synthetic")
        assert count == 1
        (record,) = read_lines(out)
        assert sorted(record) == ["bbox", "confidence", "keypoints"]
        assert len(record["keypoints"]) == len(COCO_KEYPOINT_ORDER)
        assert record["bbox"] == [130.0, 40.0, 60.0, 180.0]

    def test_conf_threshold_filters(self, standing_image, tmp_path):
        out = tmp_path / "poses.jsonl"
        count = extract_poses(standing_image, out, conf=0.95, backend="synthetic")
        assert count == 0
        assert out.read_text() == ""

    def test_rewrites_previous_output(self, standing_image, blank_image, tmp_path):
        out = tmp_path / "poses.jsonl"
        assert extract_poses(standing_image, out, backend="synthetic") == 1
        assert extract_poses(blank_image, out, backend="synthetic") == 0
        assert out.read_text() == ""


class TestDirectoryInput:
    def test_batches_every_image_sorted(self, tmp_path):
        imgdir = tmp_path / "frames"
        imgdir.mkdir()
        save_png(imgdir / "a_blank.png", blank_array())
        save_png(imgdir / "b_person.png", figure_array((40, 220), (130, 190)))
        save_png(imgdir / "c_person.png", figure_array((150, 210), (60, 260)))
        (imgdir / "notes.txt").write_text("not an image\n")
        out = tmp_path / "poses.jsonl"
        count = extract_poses(imgdir, out, backend="synthetic")
        assert count == 2
        first, second = read_lines(out)
        assert first["bbox"] == [130.0, 40.0, 60.0, 180.0]
        assert second["bbox"] == [60.0, 150.0, 200.0, 60.0]

    def test_empty_directory_rejected(self, tmp_path):
        imgdir = tmp_path / "frames"
        imgdir.mkdir()
        with pytest.raises(UnreadableImage, match="no image files"):
            extract_poses(imgdir, tmp_path / "poses.jsonl", backend="synthetic")


class TestFailures:
    def test_missing_file(self, tmp_path):
        with pytest.raises(UnreadableImage, match="cannot read image"):
            extract_poses(tmp_path / "nope.png", tmp_path / "o.jsonl", backend="synthetic")

    def test_not_an_image(self, tmp_path):
        bogus = tmp_path / "bogus.png"
        bogus.write_text("this is text\n")
        with pytest.raises(UnreadableImage, match="cannot read image"):
            extract_poses(bogus, tmp_path / "o.jsonl", backend="synthetic")

    def test_bad_model_size(self, blank_image, tmp_path):
        with pytest.raises(InvalidRequest, match="model size"):
            extract_poses(blank_image, tmp_path / "o.jsonl", model_size="xl", backend="synthetic")

    def test_bad_backend(self, blank_image, tmp_path):
        with pytest.raises(InvalidRequest, match="backend"):
            extract_poses(blank_image, tmp_path / "o.jsonl", backend="tea-leaves")

    def test_bad_threshold(self, blank_image, tmp_path):
        with pytest.raises(InvalidRequest, match="threshold"):
            extract_poses(blank_image, tmp_path / "o.jsonl", conf=1.5, backend="synthetic")

    @pytest.mark.skipif(
        ultralytics_installed(), reason="model stack present; backend would really run"
    )
    def test_model_backend_unavailable_offline(self, standing_image, tmp_path):
        with pytest.raises(ModelUnavailable, match="synthetic"):
            extract_poses(standing_image, tmp_path / "o.jsonl", backend="yolo")
