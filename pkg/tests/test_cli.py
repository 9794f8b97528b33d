"""End-to-end tests for the ``edgepose`` command line.

Every test drives ``edgepose.cli.main`` in process so exit codes and
stdout/stderr routing are exercised exactly as a shell user would see
them. The synthetic dataset fixture is deterministic, so report tables
are asserted verbatim.
"""

import logging
import subprocess
import sys

import numpy as np
import pytest

from edgepose.cli import main
from edgepose.dataset_io import (
    EstimateRecord,
    load_bop_ground_truth,
    load_detections,
    write_detections,
    write_pose_estimates,
)
from edgepose.detect_metrics import BBox
from edgepose.imaging import Image, load_png, save_png
from edgepose.synthetic import build_synthetic_dataset

EXPECTED_POSE_MD = (
    "| Object | ADD(-S) recall |\n"
    "| --- | --- |\n"
    "| 1 | 0.50 |\n"
    "| 2 | 0.50 |\n"
    "| 3 | 0.50 |\n"
    "| Mean | 0.50 |\n"
)

EXPECTED_DETECT_MD = (
    "| Object | Precision (%) | Recall (%) |\n"
    "| --- | --- | --- |\n"
    "| 1 | 80.0 | 100.0 |\n"
    "| 2 | 100.0 | 100.0 |\n"
    "| 3 | 80.0 | 100.0 |\n"
    "| Average | 86.7 | 100.0 |\n"
)


@pytest.fixture(scope="session")
def fixture_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("synthetic")
    return build_synthetic_dataset(root, seed=0)


def md_cells(text: str) -> list[list[str]]:
    rows = []
    for line in text.splitlines():
        if line.startswith("|") and "---" not in line:
            rows.append([cell.strip() for cell in line.strip("|").split("|")])
    return rows


class TestUsageErrors:
    def test_no_subcommand_exits_2(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == 2

    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["pnp", "a.csv", "b.json", "--frobnicate"])
        assert excinfo.value.code == 2

    def test_bad_format_choice_exits_2(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["eval-detect", "a.json", "b.json", "--format", "html"])
        assert excinfo.value.code == 2

    def test_zero_jobs_exits_2(self, tmp_path, capsys):
        (tmp_path / "in").mkdir()
        code = main(["preprocess", str(tmp_path / "in"), str(tmp_path / "out"), "--jobs", "0"])
        assert code == 2
        assert "--jobs" in capsys.readouterr().err

    def test_inverted_thresholds_exit_2(self, tmp_path, capsys):
        (tmp_path / "in").mkdir()
        code = main(
            ["preprocess", str(tmp_path / "in"), str(tmp_path / "out"),
             "--low", "300", "--high", "200"]
        )
        assert code == 2
        assert "exceeds" in capsys.readouterr().err

    def test_missing_input_dir_exits_2(self, tmp_path, capsys):
        code = main(["preprocess", str(tmp_path / "nope"), str(tmp_path / "out")])
        assert code == 2

    def test_bad_iou_min_exits_2(self, fixture_dataset, capsys):
        code = main(
            ["eval-detect", str(fixture_dataset.gt_detections_path),
             str(fixture_dataset.detections_path), "--iou-min", "0.0"]
        )
        assert code == 2

    def test_bad_threshold_ratio_exits_2(self, fixture_dataset, capsys):
        code = main(
            ["eval-pose", str(fixture_dataset.root), str(fixture_dataset.estimates_path),
             "--threshold-ratio", "0"]
        )
        assert code == 2

    def test_bad_symmetric_ids_exits_2(self, fixture_dataset, capsys):
        code = main(
            ["eval-pose", str(fixture_dataset.root), str(fixture_dataset.estimates_path),
             "--symmetric-ids", "1,two"]
        )
        assert code == 2


def make_png_tree(root):
    """Two images, one nested, with structure for the edge detector to find."""
    rng = np.random.default_rng(7)
    flat = np.zeros((24, 32), dtype=np.uint8)
    flat[:, 16:] = 220
    save_png(Image(flat), root / "a.png")
    (root / "sub").mkdir()
    rgb = rng.integers(0, 256, size=(20, 20, 3), dtype=np.uint8)
    rgb[5:15, 5:15] = 255
    save_png(Image(rgb), root / "sub" / "b.png")


class TestPreprocess:
    def test_layout_and_summary(self, tmp_path, capsys):
        src = tmp_path / "in"
        src.mkdir()
        make_png_tree(src)
        out = tmp_path / "out"
        assert main(["preprocess", str(src), str(out)]) == 0
        assert "processed 2 of 2 file(s) with method=canny" in capsys.readouterr().out
        assert (out / "a.png").is_file()
        assert (out / "sub" / "b.png").is_file()
        edges = load_png(out / "a.png")
        assert edges.pixels.ndim == 2
        assert set(np.unique(edges.pixels)) <= {0, 255}
        assert (edges.pixels == 255).any()

    def test_composite_keeps_three_channels(self, tmp_path, capsys):
        src = tmp_path / "in"
        src.mkdir()
        rng = np.random.default_rng(7)
        rgb = rng.integers(0, 256, size=(20, 20, 3), dtype=np.uint8)
        rgb[5:15, 5:15] = 255
        save_png(Image(rgb), src / "b.png")
        out = tmp_path / "out"
        assert main(["preprocess", str(src), str(out), "--method", "composite"]) == 0
        composite = load_png(out / "b.png")
        assert composite.pixels.shape == (20, 20, 3)
        source = load_png(src / "b.png")
        changed = np.any(composite.pixels != source.pixels, axis=-1)
        assert np.all(composite.pixels[changed] == 255)

    def test_composite_rejects_grayscale_per_file(self, tmp_path, capsys):
        src = tmp_path / "in"
        src.mkdir()
        make_png_tree(src)  # a.png is grayscale, sub/b.png is RGB
        out = tmp_path / "out"
        assert main(["preprocess", str(src), str(out), "--method", "composite"]) == 1
        text = capsys.readouterr().out
        assert "processed 1 of 2 file(s)" in text
        assert "a.png" in text and "3-channel" in text
        assert (out / "sub" / "b.png").is_file()

    def test_deterministic_across_runs_and_jobs(self, tmp_path, capsys):
        src = tmp_path / "in"
        src.mkdir()
        make_png_tree(src)
        outputs = []
        for name, jobs in (("o1", "1"), ("o2", "1"), ("o3", "4")):
            out = tmp_path / name
            assert main(["preprocess", str(src), str(out), "--jobs", jobs]) == 0
            outputs.append(
                [(out / "a.png").read_bytes(), (out / "sub" / "b.png").read_bytes()]
            )
        assert outputs[0] == outputs[1] == outputs[2]

    def test_corrupt_file_reported_without_stopping(self, tmp_path, capsys):
        src = tmp_path / "in"
        src.mkdir()
        make_png_tree(src)
        (src / "broken.png").write_bytes(b"not a png at all")
        out = tmp_path / "out"
        assert main(["preprocess", str(src), str(out)]) == 1
        text = capsys.readouterr().out
        assert "processed 2 of 3 file(s)" in text
        assert "failed:" in text and "broken.png" in text
        assert (out / "a.png").is_file()  # good files still written

    def test_empty_tree_is_success(self, tmp_path, capsys):
        src = tmp_path / "in"
        src.mkdir()
        assert main(["preprocess", str(src), str(tmp_path / "out")]) == 0
        assert "processed 0 of 0 file(s)" in capsys.readouterr().out


class TestEvalPose:
    def test_fixture_table_markdown(self, fixture_dataset, capsys):
        code = main(
            ["eval-pose", str(fixture_dataset.root), str(fixture_dataset.estimates_path)]
        )
        assert code == 0
        assert capsys.readouterr().out == EXPECTED_POSE_MD

    def test_csv_agrees_with_markdown(self, fixture_dataset, capsys):
        code = main(
            ["eval-pose", str(fixture_dataset.root), str(fixture_dataset.estimates_path),
             "--format", "csv"]
        )
        assert code == 0
        got = capsys.readouterr().out
        assert got == (
            "Object,ADD(-S) recall\n"
            "1,0.50\n"
            "2,0.50\n"
            "3,0.50\n"
            "Mean,0.50\n"
        )

    def test_output_file(self, fixture_dataset, tmp_path, capsys):
        target = tmp_path / "pose.md"
        code = main(
            ["eval-pose", str(fixture_dataset.root), str(fixture_dataset.estimates_path),
             "--output", str(target)]
        )
        assert code == 0
        assert capsys.readouterr().out == ""
        assert target.read_text() == EXPECTED_POSE_MD

    def test_jobs_do_not_change_result(self, fixture_dataset, capsys):
        code = main(
            ["eval-pose", str(fixture_dataset.root), str(fixture_dataset.estimates_path),
             "--jobs", "4"]
        )
        assert code == 0
        assert capsys.readouterr().out == EXPECTED_POSE_MD

    def test_perfect_estimates_score_one(self, fixture_dataset, tmp_path, capsys):
        index = load_bop_ground_truth(fixture_dataset.root)
        perfect = [
            EstimateRecord(r.scene_id, r.image_id, r.object_id, score=1.0, pose=r.pose)
            for r in index.records()
        ]
        path = tmp_path / "perfect.csv"
        write_pose_estimates(path, perfect)
        assert main(["eval-pose", str(fixture_dataset.root), str(path)]) == 0
        rows = md_cells(capsys.readouterr().out)
        assert [row[1] for row in rows[1:]] == ["1.00", "1.00", "1.00", "1.00"]

    def test_missing_estimates_count_as_misses(self, fixture_dataset, tmp_path, capsys):
        index = load_bop_ground_truth(fixture_dataset.root)
        only_object_one = [
            EstimateRecord(r.scene_id, r.image_id, r.object_id, score=1.0, pose=r.pose)
            for r in index.records()
            if r.object_id == 1
        ]
        path = tmp_path / "partial.csv"
        write_pose_estimates(path, only_object_one)
        assert main(["eval-pose", str(fixture_dataset.root), str(path)]) == 0
        rows = md_cells(capsys.readouterr().out)
        assert rows[1] == ["1", "1.00"]
        assert rows[2] == ["2", "0.00"]
        assert rows[3] == ["3", "0.00"]

    def test_unknown_object_id_skipped_with_warning(
        self, fixture_dataset, tmp_path, capsys, caplog
    ):
        index = load_bop_ground_truth(fixture_dataset.root)
        record = next(iter(index.records()))
        rogue = EstimateRecord(record.scene_id, record.image_id, 99, score=0.9, pose=record.pose)
        path = tmp_path / "rogue.csv"
        write_pose_estimates(path, list(_load_estimates(fixture_dataset)) + [rogue])
        with caplog.at_level(logging.WARNING, logger="edgepose.cli"):
            code = main(["eval-pose", str(fixture_dataset.root), str(path)])
        assert code == 0
        assert "unknown object id 99" in caplog.text
        assert capsys.readouterr().out == EXPECTED_POSE_MD

    def test_no_overlap_with_ground_truth_fails(self, fixture_dataset, tmp_path, capsys):
        index = load_bop_ground_truth(fixture_dataset.root)
        record = next(iter(index.records()))
        stray = EstimateRecord(7, 7, record.object_id, score=0.9, pose=record.pose)
        path = tmp_path / "stray.csv"
        write_pose_estimates(path, [stray])
        code = main(["eval-pose", str(fixture_dataset.root), str(path)])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_symmetric_override_never_lowers_recall(self, fixture_dataset, capsys):
        assert main(
            ["eval-pose", str(fixture_dataset.root), str(fixture_dataset.estimates_path)]
        ) == 0
        baseline = md_cells(capsys.readouterr().out)
        assert main(
            ["eval-pose", str(fixture_dataset.root), str(fixture_dataset.estimates_path),
             "--symmetric-ids", "1,3"]
        ) == 0
        loosened = md_cells(capsys.readouterr().out)
        for before, after in zip(baseline[1:], loosened[1:]):
            assert float(after[1]) >= float(before[1])

    def test_missing_dataset_root_fails(self, fixture_dataset, tmp_path, capsys):
        code = main(
            ["eval-pose", str(tmp_path / "absent"), str(fixture_dataset.estimates_path)]
        )
        assert code == 1


def _load_estimates(fixture_dataset):
    from edgepose.dataset_io import load_pose_estimates

    return load_pose_estimates(fixture_dataset.estimates_path)


class TestEvalDetect:
    def test_fixture_table_markdown(self, fixture_dataset, capsys):
        code = main(
            ["eval-detect", str(fixture_dataset.gt_detections_path),
             str(fixture_dataset.detections_path)]
        )
        assert code == 0
        assert capsys.readouterr().out == EXPECTED_DETECT_MD

    def test_score_min_drops_low_confidence_false_positive(self, fixture_dataset, capsys):
        code = main(
            ["eval-detect", str(fixture_dataset.gt_detections_path),
             str(fixture_dataset.detections_path), "--score-min", "0.5"]
        )
        assert code == 0
        rows = md_cells(capsys.readouterr().out)
        assert rows[3] == ["3", "100.0", "100.0"]
        assert rows[4] == ["Average", "93.3", "100.0"]

    def test_perfect_predictions(self, fixture_dataset, capsys):
        code = main(
            ["eval-detect", str(fixture_dataset.gt_detections_path),
             str(fixture_dataset.gt_detections_path)]
        )
        assert code == 0
        rows = md_cells(capsys.readouterr().out)
        for row in rows[1:]:
            assert row[1:] == ["100.0", "100.0"]

    def test_class_without_ground_truth_has_undefined_recall(self, tmp_path, capsys):
        gt = [((0, 0), BBox(0.0, 0.0, 10.0, 10.0, class_id=1))]
        preds = [
            ((0, 0), BBox(0.0, 0.0, 10.0, 10.0, class_id=1, score=0.9)),
            ((0, 0), BBox(20.0, 20.0, 30.0, 30.0, class_id=2, score=0.8)),
        ]
        gt_path = tmp_path / "gt.json"
        pred_path = tmp_path / "pred.json"
        write_detections(gt_path, gt)
        write_detections(pred_path, preds)
        assert main(["eval-detect", str(gt_path), str(pred_path)]) == 0
        rows = md_cells(capsys.readouterr().out)
        assert rows[1] == ["1", "100.0", "100.0"]
        assert rows[2] == ["2", "0.0", "—"]
        assert rows[3] == ["Average", "50.0", "100.0"]  # undefined cell excluded

    def test_empty_ground_truth_fails(self, fixture_dataset, tmp_path, capsys):
        empty = tmp_path / "empty.json"
        write_detections(empty, [])
        code = main(["eval-detect", str(empty), str(fixture_dataset.detections_path)])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_csv_agrees_with_markdown(self, fixture_dataset, capsys):
        assert main(
            ["eval-detect", str(fixture_dataset.gt_detections_path),
             str(fixture_dataset.detections_path), "--format", "csv"]
        ) == 0
        csv_text = capsys.readouterr().out
        assert csv_text.splitlines()[-1] == "Average,86.7,100.0"

    def test_output_file(self, fixture_dataset, tmp_path, capsys):
        target = tmp_path / "detect.md"
        assert main(
            ["eval-detect", str(fixture_dataset.gt_detections_path),
             str(fixture_dataset.detections_path), "--output", str(target)]
        ) == 0
        assert capsys.readouterr().out == ""
        assert target.read_text() == EXPECTED_DETECT_MD

    def test_malformed_detection_json_fails(self, fixture_dataset, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"not": "an array"}')
        code = main(["eval-detect", str(bad), str(fixture_dataset.detections_path)])
        assert code == 1


class TestPnp:
    def test_fixture_solve_recovers_pose(self, fixture_dataset, capsys):
        code = main(
            ["pnp", str(fixture_dataset.correspondences_path),
             str(fixture_dataset.intrinsics_path)]
        )
        assert code == 0
        out = capsys.readouterr().out
        lines = dict(line.split(": ", 1) for line in out.strip().splitlines())
        rotation = np.array([float(v) for v in lines["R"].split()]).reshape(3, 3)
        translation = np.array([float(v) for v in lines["t"].split()])
        np.testing.assert_allclose(rotation, fixture_dataset.pnp_pose.rotation, atol=1e-6)
        np.testing.assert_allclose(translation, fixture_dataset.pnp_pose.translation, atol=1e-3)
        assert float(lines["rmse_px"]) < 1e-6
        assert lines["converged"] == "true"
        assert int(lines["iterations"]) >= 0

    def test_too_few_correspondences_fail(self, fixture_dataset, tmp_path, capsys):
        lines = fixture_dataset.correspondences_path.read_text().splitlines()
        short = tmp_path / "short.csv"
        short.write_text("\n".join(lines[:6]) + "\n")  # header + 5 rows
        code = main(["pnp", str(short), str(fixture_dataset.intrinsics_path)])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_malformed_intrinsics_fail(self, fixture_dataset, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"fx": 600.0}')
        code = main(["pnp", str(fixture_dataset.correspondences_path), str(bad)])
        assert code == 1

    def test_missing_file_fails(self, fixture_dataset, tmp_path):
        code = main(
            ["pnp", str(tmp_path / "absent.csv"), str(fixture_dataset.intrinsics_path)]
        )
        assert code == 1


def test_module_entry_point_help():
    proc = subprocess.run(
        [sys.executable, "-m", "edgepose", "--help"],
        capture_output=True,
        text=True,
        timeout=60,
    )
    assert proc.returncode == 0
    assert "preprocess" in proc.stdout
    assert "eval-pose" in proc.stdout
