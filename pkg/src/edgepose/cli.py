"""Command-line front end.

Subcommands: ``preprocess`` (batch edge maps or RGB+edge composites),
``eval-pose`` (per-object ADD(-S) recall table), ``eval-detect``
(per-object precision/recall table), ``pnp`` (single pose solve).
Reports render as Markdown or CSV with identical numbers. Exit codes:
0 success, 1 evaluation or solve failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

from .dataset_io import load_bop_ground_truth, load_detections, load_pose_estimates
from .detect_metrics import match_detections
from .errors import EdgePoseError, EvaluationError
from .imaging import canny, composite_rgb_edges, load_png, save_png
from .pnp import load_correspondences_csv, load_intrinsics_json, solve_pnp
from .pose_metrics import score_pose
from .report import ReportTable

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

DEFAULT_CANNY_LOW = 100
DEFAULT_CANNY_HIGH = 200
DEFAULT_THRESHOLD_RATIO = 0.1
DEFAULT_IOU_MIN = 0.5
DEFAULT_SCORE_MIN = 0.0


class UsageError(Exception):
    """Bad flag values detected after argparse; maps to exit code 2."""


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


def _positive_jobs(args) -> int:
    if args.jobs < 1:
        raise UsageError(f"--jobs must be at least 1, got {args.jobs}")
    return args.jobs


def _map_jobs(jobs: int, func, items):
    """Apply func over items, optionally threaded; order is preserved."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def _parse_id_list(raw: str | None) -> set[int]:
    if not raw:
        return set()
    try:
        return {int(part) for part in raw.split(",") if part.strip()}
    except ValueError as exc:
        raise UsageError(f"--symmetric-ids expects comma-separated integers: {exc}") from exc


def cmd_preprocess(args) -> int:
    jobs = _positive_jobs(args)
    if args.low > args.high:
        raise UsageError(f"--low {args.low} exceeds --high {args.high}")
    if args.low < 0:
        raise UsageError(f"thresholds must be non-negative, got --low {args.low}")
    input_dir = Path(args.input_dir)
    if not input_dir.is_dir():
        raise UsageError(f"input directory not found: {input_dir}")
    output_dir = Path(args.output_dir)

    paths = sorted(p for p in input_dir.rglob("*.png") if p.is_file())

    def process(path: Path) -> str | None:
        """Returns an error description, or None on success."""
        try:
            image = load_png(path)
            edges = canny(image, args.low, args.high)
            if args.method == "canny":
                result = edges.to_image()
            else:
                result = composite_rgb_edges(image, edges)
            destination = output_dir / path.relative_to(input_dir)
            destination.parent.mkdir(parents=True, exist_ok=True)
            save_png(result, destination)
            return None
        except (EdgePoseError, ValueError, OSError) as exc:
            return f"{path}: {exc}"

    failures = [msg for msg in _map_jobs(jobs, process, paths) if msg is not None]
    processed = len(paths) - len(failures)
    summary = f"processed {processed} of {len(paths)} file(s) with method={args.method}\n"
    if failures:
        summary += "".join(f"failed: {msg}\n" for msg in failures)
    _emit(summary, args.output)
    return EXIT_FAILURE if failures else EXIT_OK


def cmd_eval_pose(args) -> int:
    jobs = _positive_jobs(args)
    if not args.threshold_ratio > 0.0:
        raise UsageError(f"--threshold-ratio must be positive, got {args.threshold_ratio}")
    symmetric_ids = _parse_id_list(args.symmetric_ids)

    index = load_bop_ground_truth(args.dataset_root)
    estimates = load_pose_estimates(args.estimates)

    models = dict(index.models)
    for object_id in symmetric_ids:
        if object_id in models and not models[object_id].symmetric:
            models[object_id] = replace(models[object_id], symmetric=True)

    gt_keys = {
        (r.scene_id, r.image_id, r.object_id) for records in index.ground_truths.values()
        for r in records
    }
    best: dict[tuple[int, int, int], object] = {}
    matched = 0
    for estimate in estimates:
        key = (estimate.scene_id, estimate.image_id, estimate.object_id)
        if estimate.object_id not in models:
            logger.warning(
                "skipping estimate for unknown object id %d (scene %d, image %d)",
                estimate.object_id, estimate.scene_id, estimate.image_id,
            )
            continue
        if key not in gt_keys:
            logger.warning(
                "skipping estimate without ground truth (scene %d, image %d, object %d)",
                estimate.scene_id, estimate.image_id, estimate.object_id,
            )
            continue
        matched += 1
        current = best.get(key)
        if current is None or estimate.score > current.score:
            best[key] = estimate
    if matched == 0:
        raise EvaluationError("no estimate matches any ground-truth record")

    records = list(index.records())

    def judge(record) -> tuple[int, bool]:
        estimate = best.get((record.scene_id, record.image_id, record.object_id))
        if estimate is None:
            return record.object_id, False  # missing estimate counts as inaccurate
        result = score_pose(
            models[record.object_id], estimate.pose, record.pose,
            threshold_ratio=args.threshold_ratio,
        )
        return record.object_id, result.accurate

    tallies: dict[int, list[int]] = {}
    for object_id, accurate in _map_jobs(jobs, judge, records):
        accurate_count, total = tallies.setdefault(object_id, [0, 0])
        tallies[object_id] = [accurate_count + int(accurate), total + 1]

    table = ReportTable(
        key_label="Object", columns=["ADD(-S) recall"], decimals=2, summary_label="Mean"
    )
    for object_id in sorted(tallies):
        accurate_count, total = tallies[object_id]
        table.add_row(object_id, [Fraction(accurate_count, total)])
    _emit(table.render(args.format), args.output)
    return EXIT_OK


def cmd_eval_detect(args) -> int:
    jobs = _positive_jobs(args)
    if not 0.0 < args.iou_min <= 1.0:
        raise UsageError(f"--iou-min must lie in (0, 1], got {args.iou_min}")
    if not 0.0 <= args.score_min <= 1.0:
        raise UsageError(f"--score-min must lie in [0, 1], got {args.score_min}")

    ground_truths = load_detections(args.gt)
    predictions = load_detections(args.detections)
    if not ground_truths:
        raise EvaluationError("ground-truth detection file holds no boxes")

    by_key: dict[tuple[int, int], tuple[list, list]] = {}
    for key, box in ground_truths:
        by_key.setdefault(key, ([], []))[0].append(box)
    for key, box in predictions:
        by_key.setdefault(key, ([], []))[1].append(box)

    def tally(item) -> dict[int, list[int]]:
        _, (gts, preds) = item
        result = match_detections(preds, gts, iou_min=args.iou_min, score_min=args.score_min)
        scored = [p for p in preds if p.score >= args.score_min]
        per_class: dict[int, list[int]] = {}  # class -> [tp, fp, fn]
        for class_id in {b.class_id for b in scored} | {b.class_id for b in gts}:
            per_class[class_id] = [0, 0, 0]
        for pred_index, _ in result.pairs:
            per_class[preds[pred_index].class_id][0] += 1
        for class_id, counts in per_class.items():
            considered = sum(1 for b in scored if b.class_id == class_id)
            total_gt = sum(1 for b in gts if b.class_id == class_id)
            counts[1] = considered - counts[0]
            counts[2] = total_gt - counts[0]
        return per_class

    totals: dict[int, list[int]] = {}
    for per_class in _map_jobs(jobs, tally, sorted(by_key.items())):
        for class_id, (tp, fp, fn) in per_class.items():
            base = totals.setdefault(class_id, [0, 0, 0])
            base[0] += tp
            base[1] += fp
            base[2] += fn

    table = ReportTable(
        key_label="Object",
        columns=["Precision (%)", "Recall (%)"],
        decimals=1,
        summary_label="Average",
        percent=True,
    )
    for class_id in sorted(totals):
        tp, fp, fn = totals[class_id]
        precision_cell = Fraction(tp, tp + fp) if tp + fp else None
        recall_cell = Fraction(tp, tp + fn) if tp + fn else None
        table.add_row(class_id, [precision_cell, recall_cell])
    _emit(table.render(args.format), args.output)
    return EXIT_OK


def cmd_pnp(args) -> int:
    correspondences = load_correspondences_csv(args.correspondences)
    intrinsics = load_intrinsics_json(args.intrinsics)
    result = solve_pnp(correspondences, intrinsics)
    rotation = " ".join(repr(float(v)) for v in result.pose.rotation.reshape(-1))
    translation = " ".join(repr(float(v)) for v in result.pose.translation)
    text = (
        f"R: {rotation}\n"
        f"t: {translation}\n"
        f"rmse_px: {result.reprojection_rmse!r}\n"
        f"iterations: {result.iterations}\n"
        f"converged: {str(result.converged).lower()}\n"
    )
    _emit(text, args.output)
    return EXIT_OK if result.converged else EXIT_FAILURE


def _add_common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--format", choices=("md", "csv"), default="md",
                     help="report format (default: md)")
    sub.add_argument("--output", default=None, metavar="PATH",
                     help="write output to PATH instead of stdout")
    sub.add_argument("--jobs", type=int, default=1, metavar="N",
                     help="worker threads for independent items (default: 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgepose",
        description="Edge-map pre-processing and 6D pose / detection benchmark scoring.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    pre = subparsers.add_parser(
        "preprocess", help="write Canny edge maps or RGB+edge composites for a PNG tree"
    )
    pre.add_argument("input_dir", help="directory scanned recursively for *.png")
    pre.add_argument("output_dir", help="destination root; relative layout is preserved")
    pre.add_argument("--method", choices=("canny", "composite"), default="canny",
                     help="edge map only, or edges overlaid on the source (default: canny)")
    pre.add_argument("--low", type=int, default=DEFAULT_CANNY_LOW,
                     help=f"lower hysteresis threshold (default: {DEFAULT_CANNY_LOW})")
    pre.add_argument("--high", type=int, default=DEFAULT_CANNY_HIGH,
                     help=f"upper hysteresis threshold (default: {DEFAULT_CANNY_HIGH})")
    _add_common_flags(pre)
    pre.set_defaults(func=cmd_preprocess)

    pose = subparsers.add_parser(
        "eval-pose", help="ADD(-S) recall per object from a BOP-style dataset and estimate CSV"
    )
    pose.add_argument("dataset_root", help="BOP-style dataset root")
    pose.add_argument("estimates", help="estimate CSV (scene_id,im_id,obj_id,score,R,t,time)")
    pose.add_argument("--threshold-ratio", type=float, default=DEFAULT_THRESHOLD_RATIO,
                      help=f"accuracy threshold as a fraction of the model diameter "
                           f"(default: {DEFAULT_THRESHOLD_RATIO})")
    pose.add_argument("--symmetric-ids", default=None, metavar="IDS",
                      help="comma-separated object ids scored with ADD-S in addition to "
                           "any marked symmetric in models_info.json")
    _add_common_flags(pose)
    pose.set_defaults(func=cmd_eval_pose)

    detect = subparsers.add_parser(
        "eval-detect", help="detection precision/recall per object from detection JSON files"
    )
    detect.add_argument("gt", help="ground-truth boxes (detection JSON, scores ignored)")
    detect.add_argument("detections", help="predicted boxes (detection JSON)")
    detect.add_argument("--iou-min", type=float, default=DEFAULT_IOU_MIN,
                        help=f"IoU required for a match (default: {DEFAULT_IOU_MIN})")
    detect.add_argument("--score-min", type=float, default=DEFAULT_SCORE_MIN,
                        help=f"drop predictions scoring below this (default: {DEFAULT_SCORE_MIN})")
    _add_common_flags(detect)
    detect.set_defaults(func=cmd_eval_detect)

    pnp = subparsers.add_parser(
        "pnp", help="solve one pose from a correspondence CSV and an intrinsics JSON"
    )
    pnp.add_argument("correspondences", help="CSV with header x3d,y3d,z3d,u,v")
    pnp.add_argument("intrinsics", help="JSON object with fx, fy, cx, cy")
    _add_common_flags(pnp)
    pnp.set_defaults(func=cmd_pnp)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EdgePoseError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
