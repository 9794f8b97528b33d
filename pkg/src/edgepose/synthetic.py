"""Deterministic synthetic dataset builder for tests and demos.

Builds a miniature BOP-style dataset (2 scenes x 2 images, 3 objects)
plus matching estimate, detection, and PnP fixture files. Everything is
derived from a seeded generator, so two builds with the same seed produce
byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset_io import (
    EstimateRecord,
    GroundTruthRecord,
    write_detections,
    write_models_info,
    write_ply_model,
    write_pose_estimates,
    write_scene_camera,
    write_scene_gt,
)
from .detect_metrics import BBox
from .imaging import Image, save_png
from .pnp import (
    CameraIntrinsics,
    Correspondence,
    project_points,
    write_correspondences_csv,
    write_intrinsics_json,
)
from .pose_metrics import ModelPoints, Pose, model_diameter
from .rotation import random_rotation

IMAGE_WIDTH = 96
IMAGE_HEIGHT = 72

SCENE_IDS = (0, 1)
IMAGE_IDS = (0, 1)
OBJECT_IDS = (1, 2, 3)
SYMMETRIC_OBJECT_IDS = (2,)

_CAMERA = CameraIntrinsics(fx=600.0, fy=600.0, cx=48.0, cy=36.0)

_OBJECT_COLORS = {1: (200, 80, 60), 2: (70, 190, 90), 3: (90, 110, 220)}


@dataclass(frozen=True)
class SyntheticDataset:
    root: Path
    estimates_path: Path
    gt_detections_path: Path
    detections_path: Path
    correspondences_path: Path
    intrinsics_path: Path
    pnp_pose: Pose
    pnp_intrinsics: CameraIntrinsics


def _make_model(rng: np.random.Generator, radius: float) -> np.ndarray:
    """A box shell plus a few interior points, roughly 2*radius across."""
    corners = np.array(
        [[sx, sy, sz] for sx in (-1.0, 1.0) for sy in (-1.0, 1.0) for sz in (-1.0, 1.0)]
    )
    interior = rng.uniform(-0.8, 0.8, size=(12, 3))
    return np.vstack([corners, interior]) * radius


def _scene_pose(rng: np.random.Generator) -> Pose:
    rotation = random_rotation(rng)
    translation = np.array(
        [rng.uniform(-15.0, 15.0), rng.uniform(-10.0, 10.0), rng.uniform(500.0, 700.0)]
    )
    return Pose(rotation, translation)


def _projected_bbox(model: ModelPoints, pose: Pose, object_id: int) -> BBox:
    uv = project_points(pose, _CAMERA, model.points)
    x0 = float(np.floor(uv[:, 0].min()))
    y0 = float(np.floor(uv[:, 1].min()))
    x1 = float(np.ceil(uv[:, 0].max()))
    y1 = float(np.ceil(uv[:, 1].max()))
    x0 = max(x0, 0.0)
    y0 = max(y0, 0.0)
    x1 = min(max(x1, x0 + 2.0), float(IMAGE_WIDTH))
    y1 = min(max(y1, y0 + 2.0), float(IMAGE_HEIGHT))
    return BBox(x0, y0, x1, y1, class_id=object_id, score=1.0)


def _render_image(records) -> Image:
    """Flat background with filled, outlined rectangles at the object boxes."""
    pixels = np.empty((IMAGE_HEIGHT, IMAGE_WIDTH, 3), dtype=np.uint8)
    pixels[..., 0] = 24
    pixels[..., 1] = 28
    pixels[..., 2] = 34
    for record in records:
        box = record.bbox
        x0, y0, x1, y1 = (int(box.x_min), int(box.y_min), int(box.x_max), int(box.y_max))
        pixels[y0:y1, x0:x1] = _OBJECT_COLORS[record.object_id]
        pixels[y0, x0:x1] = 255
        pixels[y1 - 1, x0:x1] = 255
        pixels[y0:y1, x0] = 255
        pixels[y0:y1, x1 - 1] = 255
    return Image(pixels)


def build_synthetic_dataset(root, seed: int = 0) -> SyntheticDataset:
    """Write the fixture tree under ``root`` and return its key paths."""
    root = Path(root)
    rng = np.random.default_rng(seed)

    models_dir = root / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    models: dict[int, ModelPoints] = {}
    info: dict[int, dict] = {}
    for object_id in OBJECT_IDS:
        radius = 10.0 + 4.0 * object_id
        points = _make_model(rng, radius)
        diameter = model_diameter(points)
        entry: dict = {"diameter": diameter}
        if object_id in SYMMETRIC_OBJECT_IDS:
            # 180 degree symmetry about z, in BOP's discrete-symmetry form.
            entry["symmetries_discrete"] = [
                [-1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]
            ]
        info[object_id] = entry
        # Alternate encodings so both PLY paths stay exercised.
        write_ply_model(models_dir / f"obj_{object_id:06d}.ply", points, binary=object_id % 2 == 0)
        models[object_id] = ModelPoints(points=points, diameter=diameter)
    write_models_info(models_dir / "models_info.json", info)

    ground_truths: list[GroundTruthRecord] = []
    estimates: list[EstimateRecord] = []
    gt_boxes: list[tuple[tuple[int, int], BBox]] = []
    predictions: list[tuple[tuple[int, int], BBox]] = []
    for scene_id in SCENE_IDS:
        scene_dir = root / f"{scene_id:06d}"
        (scene_dir / "rgb").mkdir(parents=True, exist_ok=True)
        scene_records: list[GroundTruthRecord] = []
        cameras = {}
        for image_id in IMAGE_IDS:
            cameras[image_id] = _CAMERA
            image_records = []
            for object_id in OBJECT_IDS:
                pose = _scene_pose(rng)
                bbox = _projected_bbox(models[object_id], pose, object_id)
                record = GroundTruthRecord(
                    scene_id=scene_id,
                    image_id=image_id,
                    object_id=object_id,
                    pose=pose,
                    bbox=bbox,
                )
                image_records.append(record)
                gt_boxes.append(((scene_id, image_id), bbox))

                shifted = BBox(
                    bbox.x_min + 1.0,
                    bbox.y_min + 1.0,
                    bbox.x_max + 1.0,
                    bbox.y_max + 1.0,
                    class_id=object_id,
                    score=round(0.6 + 0.4 * float(rng.random()), 6),
                )
                predictions.append(((scene_id, image_id), shifted))

                last = scene_id == SCENE_IDS[-1] and image_id == IMAGE_IDS[-1]
                if last and object_id == OBJECT_IDS[-1]:
                    continue  # deliberately missing estimate: scored as inaccurate
                # Parity rule gives every object a mix of hits and misses.
                accurate = (scene_id + image_id + object_id) % 2 == 0
                diameter = models[object_id].diameter
                offset = (0.05 if accurate else 0.5) * diameter
                est_pose = Pose(pose.rotation, pose.translation + np.array([offset, 0.0, 0.0]))
                estimates.append(
                    EstimateRecord(
                        scene_id=scene_id,
                        image_id=image_id,
                        object_id=object_id,
                        score=round(0.5 + 0.5 * float(rng.random()), 6),
                        pose=est_pose,
                        time=None if object_id == 1 else round(float(rng.random()), 6),
                    )
                )
            scene_records.extend(image_records)
            save_png(_render_image(image_records), scene_dir / "rgb" / f"{image_id:06d}.png")
        write_scene_gt(scene_dir / "scene_gt.json", scene_records)
        write_scene_camera(scene_dir / "scene_camera.json", cameras)

    # One confident false positive far from every object, one sub-threshold one.
    predictions.append(((0, 0), BBox(2.0, 2.0, 10.0, 10.0, class_id=1, score=0.55)))
    predictions.append(((1, 0), BBox(80.0, 2.0, 92.0, 12.0, class_id=3, score=0.02)))

    estimates_path = root / "estimates.csv"
    write_pose_estimates(estimates_path, estimates)
    gt_detections_path = root / "gt_detections.json"
    write_detections(gt_detections_path, gt_boxes)
    detections_path = root / "detections.json"
    write_detections(detections_path, predictions)

    # PnP fixture: noiseless projections of the first model under a fresh pose.
    pnp_pose = _scene_pose(rng)
    model_points = models[OBJECT_IDS[0]].points[:12]
    uv = project_points(pnp_pose, _CAMERA, model_points)
    correspondences = [Correspondence(p, q) for p, q in zip(model_points, uv)]
    correspondences_path = root / "pnp_correspondences.csv"
    write_correspondences_csv(correspondences_path, correspondences)
    intrinsics_path = root / "pnp_intrinsics.json"
    write_intrinsics_json(intrinsics_path, _CAMERA)

    return SyntheticDataset(
        root=root,
        estimates_path=estimates_path,
        gt_detections_path=gt_detections_path,
        detections_path=detections_path,
        correspondences_path=correspondences_path,
        intrinsics_path=intrinsics_path,
        pnp_pose=pnp_pose,
        pnp_intrinsics=_CAMERA,
    )
