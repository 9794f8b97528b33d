"""Readers and writers for BOP-style dataset files.

Directory layout::

    root/
      models/
        models_info.json          object diameters (and symmetry flags)
        obj_000001.ply            vertex positions, millimeters
      000000/                     one directory per scene, all-digit name
        scene_gt.json             image id -> list of ground-truth records
        scene_camera.json         image id -> {"cam_K": [9 floats row-major]}
        rgb/000000.png            input images (consumed by preprocess)

Rotations are stored as 9 row-major floats (``cam_R_m2c``), translations
in millimeters (``cam_t_m2c``). Estimate files are CSV with header
``scene_id,im_id,obj_id,score,R,t,time``; detection files are JSON arrays
of ``{scene_id, image_id, category_id, bbox: [x, y, w, h], score}``.

Every writer here is the exact inverse of the matching loader: floats are
serialized via ``repr`` (JSON, CSV, ASCII PLY) or as little-endian doubles
(binary PLY), both of which round-trip float64 values bit-exactly.
"""

from __future__ import annotations

import csv
import json
import logging
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .detect_metrics import BBox
from .errors import FormatError
from .pnp import CameraIntrinsics
from .pose_metrics import ModelPoints, Pose, model_diameter

logger = logging.getLogger(__name__)

ESTIMATE_HEADER = ["scene_id", "im_id", "obj_id", "score", "R", "t", "time"]

# Fixed-width PLY scalar types and their struct codes.
_PLY_SCALARS = {
    "char": "b", "int8": "b",
    "uchar": "B", "uint8": "B",
    "short": "h", "int16": "h",
    "ushort": "H", "uint16": "H",
    "int": "i", "int32": "i",
    "uint": "I", "uint32": "I",
    "float": "f", "float32": "f",
    "double": "d", "float64": "d",
}
_PLY_FLOATS = {"float", "float32", "double", "float64"}


@dataclass(frozen=True)
class GroundTruthRecord:
    scene_id: int
    image_id: int
    object_id: int
    pose: Pose
    bbox: BBox | None = None


@dataclass(frozen=True)
class EstimateRecord:
    scene_id: int
    image_id: int
    object_id: int
    score: float
    pose: Pose
    time: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")


@dataclass(frozen=True)
class DatasetIndex:
    """Parsed dataset: treat as read-only after construction."""

    root: Path
    cameras: dict = field(repr=False)  # scene_id -> {image_id -> CameraIntrinsics}
    ground_truths: dict = field(repr=False)  # (scene_id, image_id) -> tuple of records
    models: dict = field(repr=False)  # object_id -> ModelPoints

    def camera(self, scene_id: int, image_id: int) -> CameraIntrinsics:
        return self.cameras[scene_id][image_id]

    def images(self) -> list[tuple[int, int]]:
        return sorted(self.ground_truths)

    def object_ids(self) -> list[int]:
        ids = {r.object_id for records in self.ground_truths.values() for r in records}
        return sorted(ids)

    def records(self):
        for key in self.images():
            yield from self.ground_truths[key]


def _as_number(value, what: str, **ctx) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FormatError(f"{what} must be a number, got {value!r}", **ctx)
    return float(value)


def _as_int(value, what: str, **ctx) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise FormatError(f"{what} must be an integer, got {value!r}", **ctx)
    return value


def _load_json(path) -> object:
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc}", path=path) from exc


def _image_keyed_object(raw, path) -> list[tuple[int, object]]:
    """BOP scene files are JSON objects keyed by stringified image ids."""
    if not isinstance(raw, dict):
        raise FormatError("expected a JSON object keyed by image id", path=path)
    items = []
    for key, value in raw.items():
        try:
            image_id = int(key)
        except ValueError:
            raise FormatError(f"non-integer image key {key!r}", path=path) from None
        items.append((image_id, value))
    items.sort(key=lambda kv: kv[0])
    return items


def load_scene_gt(path, scene_id: int | None = None) -> dict[int, tuple[GroundTruthRecord, ...]]:
    """Parse one ``scene_gt.json`` into per-image ground-truth records."""
    raw = _load_json(path)
    sid = scene_id if scene_id is not None else 0
    out: dict[int, tuple[GroundTruthRecord, ...]] = {}
    for image_id, entries in _image_keyed_object(raw, path):
        ctx = {"path": path, "scene_id": scene_id, "image_id": image_id}
        if not isinstance(entries, list):
            raise FormatError("expected a list of ground-truth records", **ctx)
        records = []
        for i, entry in enumerate(entries):
            if not isinstance(entry, dict):
                raise FormatError(f"record {i} is not an object", **ctx)
            for key in ("cam_R_m2c", "cam_t_m2c", "obj_id"):
                if key not in entry:
                    raise FormatError(f"record {i} is missing {key!r}", **ctx)
            rot_raw = entry["cam_R_m2c"]
            t_raw = entry["cam_t_m2c"]
            if not isinstance(rot_raw, list) or len(rot_raw) != 9:
                raise FormatError(f"record {i}: cam_R_m2c must hold 9 values", **ctx)
            if not isinstance(t_raw, list) or len(t_raw) != 3:
                raise FormatError(f"record {i}: cam_t_m2c must hold 3 values", **ctx)
            rot = np.array(
                [_as_number(v, "cam_R_m2c entry", **ctx) for v in rot_raw]
            ).reshape(3, 3)
            t = np.array([_as_number(v, "cam_t_m2c entry", **ctx) for v in t_raw])
            object_id = _as_int(entry["obj_id"], "obj_id", **ctx)
            try:
                pose = Pose(rot, t)
            except ValueError as exc:
                raise FormatError(f"record {i} (obj_id {object_id}): {exc}", **ctx) from exc
            bbox = None
            if "bbox_obj" in entry:
                box_raw = entry["bbox_obj"]
                if not isinstance(box_raw, list) or len(box_raw) != 4:
                    raise FormatError(f"record {i}: bbox_obj must hold 4 values", **ctx)
                x, y, w, h = (_as_number(v, "bbox_obj entry", **ctx) for v in box_raw)
                try:
                    bbox = BBox(x, y, x + w, y + h, class_id=object_id, score=1.0)
                except ValueError as exc:
                    raise FormatError(f"record {i}: {exc}", **ctx) from exc
            records.append(
                GroundTruthRecord(
                    scene_id=sid, image_id=image_id, object_id=object_id, pose=pose, bbox=bbox
                )
            )
        out[image_id] = tuple(records)
    return out


def write_scene_gt(path, records) -> None:
    """Write ground-truth records (one scene) as ``scene_gt.json``."""
    by_image: dict[int, list] = {}
    for record in records:
        entry = {
            "cam_R_m2c": [float(v) for v in record.pose.rotation.reshape(-1)],
            "cam_t_m2c": [float(v) for v in record.pose.translation],
            "obj_id": record.object_id,
        }
        if record.bbox is not None:
            box = record.bbox
            entry["bbox_obj"] = [
                float(box.x_min),
                float(box.y_min),
                float(box.x_max - box.x_min),
                float(box.y_max - box.y_min),
            ]
        by_image.setdefault(record.image_id, []).append(entry)
    payload = {str(image_id): by_image[image_id] for image_id in sorted(by_image)}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_scene_camera(path, scene_id: int | None = None) -> dict[int, CameraIntrinsics]:
    """Parse one ``scene_camera.json`` into per-image intrinsics."""
    raw = _load_json(path)
    out: dict[int, CameraIntrinsics] = {}
    for image_id, entry in _image_keyed_object(raw, path):
        ctx = {"path": path, "scene_id": scene_id, "image_id": image_id}
        if not isinstance(entry, dict) or "cam_K" not in entry:
            raise FormatError("camera record is missing 'cam_K'", **ctx)
        k = entry["cam_K"]
        if not isinstance(k, list) or len(k) != 9:
            raise FormatError("cam_K must hold 9 values", **ctx)
        values = [_as_number(v, "cam_K entry", **ctx) for v in k]
        try:
            out[image_id] = CameraIntrinsics(
                fx=values[0], fy=values[4], cx=values[2], cy=values[5]
            )
        except ValueError as exc:
            raise FormatError(str(exc), **ctx) from exc
    return out


def write_scene_camera(path, cameras: dict[int, CameraIntrinsics]) -> None:
    payload = {}
    for image_id in sorted(cameras):
        cam = cameras[image_id]
        payload[str(image_id)] = {
            "cam_K": [cam.fx, 0.0, cam.cx, 0.0, cam.fy, cam.cy, 0.0, 0.0, 1.0]
        }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _parse_ply_header(fh, path):
    """Return (format, [(element, count, [(prop, type)])]) from an open binary file."""
    magic = fh.readline()
    if magic.strip() != b"ply":
        raise FormatError("not a PLY file (missing 'ply' magic)", path=path)
    fmt = None
    elements = []  # (name, count, [(prop_name, type_name)])
    while True:
        line = fh.readline()
        if not line:
            raise FormatError("unterminated PLY header", path=path)
        tokens = line.decode("ascii", errors="replace").split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            if len(tokens) != 3 or tokens[1] not in ("ascii", "binary_little_endian"):
                raise FormatError(f"unsupported PLY format line: {line!r}", path=path)
            fmt = tokens[1]
        elif tokens[0] == "element":
            if len(tokens) != 3 or not tokens[2].isdigit():
                raise FormatError(f"malformed element line: {line!r}", path=path)
            elements.append((tokens[1], int(tokens[2]), []))
        elif tokens[0] == "property":
            if not elements:
                raise FormatError("property before any element", path=path)
            if tokens[1] == "list":
                if len(tokens) != 5:
                    raise FormatError(f"malformed list property: {line!r}", path=path)
                elements[-1][2].append((tokens[4], ("list", tokens[2], tokens[3])))
            else:
                if len(tokens) != 3:
                    raise FormatError(f"malformed property line: {line!r}", path=path)
                if tokens[1] not in _PLY_SCALARS:
                    raise FormatError(f"unsupported property type {tokens[1]!r}", path=path)
                elements[-1][2].append((tokens[2], tokens[1]))
        elif tokens[0] == "end_header":
            break
        else:
            raise FormatError(f"unrecognized header line: {line!r}", path=path)
    if fmt is None:
        raise FormatError("PLY header has no format line", path=path)
    return fmt, elements


def load_ply_vertices(path) -> np.ndarray:
    """Read the vertex positions of an ASCII or binary little-endian PLY."""
    with open(path, "rb") as fh:
        fmt, elements = _parse_ply_header(fh, path)
        vertex_spec = None
        preceding = []
        for name, count, props in elements:
            if name == "vertex":
                vertex_spec = (count, props)
                break
            preceding.append((name, count, props))
        if vertex_spec is None:
            raise FormatError("PLY file has no vertex element", path=path)
        count, props = vertex_spec
        if count == 0:
            raise FormatError("vertex element is empty", path=path)
        names = [p[0] for p in props]
        for axis in ("x", "y", "z"):
            if axis not in names:
                raise FormatError(f"vertex element lacks {axis!r} property", path=path)
            if props[names.index(axis)][1] not in _PLY_FLOATS:
                raise FormatError(f"vertex property {axis!r} must be float or double", path=path)
        if any(isinstance(p[1], tuple) for p in props):
            raise FormatError("list property inside vertex element is unsupported", path=path)

        if fmt == "ascii":
            for name, n, _ in preceding:
                for _ in range(n):
                    if not fh.readline():
                        raise FormatError(f"truncated {name} element", path=path)
            rows = np.empty((count, 3), dtype=np.float64)
            cols = [names.index(a) for a in ("x", "y", "z")]
            for i in range(count):
                line = fh.readline()
                if not line:
                    raise FormatError(f"truncated vertex data at row {i}", path=path)
                parts = line.split()
                if len(parts) != len(props):
                    raise FormatError(
                        f"vertex row {i}: expected {len(props)} values, got {len(parts)}",
                        path=path,
                    )
                try:
                    rows[i] = [float(parts[c]) for c in cols]
                except ValueError as exc:
                    raise FormatError(f"vertex row {i}: {exc}", path=path) from exc
            return rows

        # Binary: elements before the vertex block must be fixed width to skip.
        for name, n, eprops in preceding:
            if any(isinstance(p[1], tuple) for p in eprops):
                raise FormatError(
                    f"cannot skip list-typed element {name!r} before vertex data", path=path
                )
            stride = sum(struct.calcsize("<" + _PLY_SCALARS[p[1]]) for p in eprops)
            fh.seek(n * stride, 1)
        record = struct.Struct("<" + "".join(_PLY_SCALARS[p[1]] for p in props))
        blob = fh.read(record.size * count)
        if len(blob) != record.size * count:
            raise FormatError("truncated vertex data", path=path)
        rows = np.empty((count, 3), dtype=np.float64)
        cols = [names.index(a) for a in ("x", "y", "z")]
        for i, values in enumerate(record.iter_unpack(blob)):
            rows[i] = [values[c] for c in cols]
        return rows


_MODEL_NAME = re.compile(r"obj_(\d+)\.ply$")


def load_ply_model(path, info: dict | None = None) -> ModelPoints:
    """Load a PLY model; diameter comes from ``models_info.json`` when present.

    ``info`` is the already-parsed per-object entry; when None it is looked
    up in a ``models_info.json`` beside the model using the object id from
    the ``obj_XXXXXX.ply`` filename. Without either, the diameter is
    computed from the vertices. A stated diameter wins, with the computed
    value logged for cross-checking.
    """
    path = Path(path)
    points = load_ply_vertices(path)
    if info is None:
        info_path = path.parent / "models_info.json"
        match = _MODEL_NAME.search(path.name)
        if info_path.is_file() and match:
            registry = load_models_info(info_path)
            info = registry.get(int(match.group(1)))

    symmetric = False
    diameter = None
    if info is not None:
        symmetric = bool(
            info.get("symmetries_discrete") or info.get("symmetries_continuous")
        )
        if "diameter" in info:
            diameter = _as_number(info["diameter"], "diameter", path=path)

    if points.shape[0] >= 2:
        computed = model_diameter(points)
    else:
        computed = None
    if diameter is None:
        if computed is None:
            raise FormatError("single-vertex model needs a stated diameter", path=path)
        diameter = computed
    elif computed is not None:
        logger.info(
            "%s: stated diameter %.6g mm, computed %.6g mm", path.name, diameter, computed
        )
        if abs(diameter - computed) > 0.01 * max(diameter, computed):
            logger.warning(
                "%s: stated diameter %.6g mm differs from computed %.6g mm by more than 1%%",
                path.name,
                diameter,
                computed,
            )
    return ModelPoints(points=points, diameter=diameter, symmetric=symmetric)


def write_ply_model(path, points: np.ndarray, binary: bool = False) -> None:
    """Write vertex positions as PLY with double precision coordinates."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
        raise ValueError(f"expected a non-empty (n, 3) array, got shape {pts.shape}")
    fmt = "binary_little_endian" if binary else "ascii"
    header = (
        "ply\n"
        f"format {fmt} 1.0\n"
        f"element vertex {pts.shape[0]}\n"
        "property double x\n"
        "property double y\n"
        "property double z\n"
        "end_header\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            fh.write(pts.astype("<f8").tobytes())
        else:
            for row in pts:
                x, y, z = (float(v) for v in row)
                fh.write(f"{x!r} {y!r} {z!r}\n".encode("ascii"))


def load_models_info(path) -> dict[int, dict]:
    raw = _load_json(path)
    if not isinstance(raw, dict):
        raise FormatError("models_info must be a JSON object keyed by object id", path=path)
    out = {}
    for key, value in raw.items():
        try:
            object_id = int(key)
        except ValueError:
            raise FormatError(f"non-integer object key {key!r}", path=path) from None
        if not isinstance(value, dict):
            raise FormatError(f"entry for object {object_id} is not an object", path=path)
        out[object_id] = value
    return out


def write_models_info(path, info: dict[int, dict]) -> None:
    payload = {str(object_id): info[object_id] for object_id in sorted(info)}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_model_registry(models_dir) -> dict[int, ModelPoints]:
    """Load every ``obj_XXXXXX.ply`` under a models directory."""
    models_dir = Path(models_dir)
    if not models_dir.is_dir():
        raise FormatError("models directory not found", path=models_dir)
    info_path = models_dir / "models_info.json"
    registry_info = load_models_info(info_path) if info_path.is_file() else {}
    models = {}
    for ply_path in sorted(models_dir.glob("obj_*.ply")):
        match = _MODEL_NAME.search(ply_path.name)
        if match is None:
            continue
        object_id = int(match.group(1))
        models[object_id] = load_ply_model(ply_path, info=registry_info.get(object_id))
    if not models:
        raise FormatError("no obj_*.ply models found", path=models_dir)
    return models


def load_bop_ground_truth(root) -> DatasetIndex:
    """Walk a BOP-style root and build the full dataset index.

    Scene directories are the all-digit children of the root. Every
    ground-truth object id must resolve in the model registry.
    """
    root = Path(root)
    if not root.is_dir():
        raise FormatError("dataset root is not a directory", path=root)
    scene_dirs = sorted(
        (d for d in root.iterdir() if d.is_dir() and d.name.isdigit()),
        key=lambda d: int(d.name),
    )
    if not scene_dirs:
        raise FormatError("no scene directories (all-digit names) under root", path=root)
    models = load_model_registry(root / "models")

    cameras: dict[int, dict[int, CameraIntrinsics]] = {}
    ground_truths: dict[tuple[int, int], tuple[GroundTruthRecord, ...]] = {}
    for scene_dir in scene_dirs:
        scene_id = int(scene_dir.name)
        gt_path = scene_dir / "scene_gt.json"
        cam_path = scene_dir / "scene_camera.json"
        for required in (gt_path, cam_path):
            if not required.is_file():
                raise FormatError("required scene file missing", path=required, scene_id=scene_id)
        cameras[scene_id] = load_scene_camera(cam_path, scene_id=scene_id)
        for image_id, records in load_scene_gt(gt_path, scene_id=scene_id).items():
            if image_id not in cameras[scene_id]:
                raise FormatError(
                    "image has ground truth but no camera record",
                    path=gt_path,
                    scene_id=scene_id,
                    image_id=image_id,
                )
            ground_truths[(scene_id, image_id)] = records

    known = set(models)
    missing = sorted(
        {r.object_id for records in ground_truths.values() for r in records} - known
    )
    if missing:
        raise FormatError(
            f"ground truth references object ids without models: {missing}", path=root
        )
    return DatasetIndex(root=root, cameras=cameras, ground_truths=ground_truths, models=models)


def load_pose_estimates(path) -> list[EstimateRecord]:
    """Read a BOP-style estimate CSV into typed records."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("empty estimate file", path=path) from None
        if header != ESTIMATE_HEADER:
            raise FormatError(
                f"expected header {','.join(ESTIMATE_HEADER)!r}, got {','.join(header)!r}",
                path=path,
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 7:
                raise FormatError(f"expected 7 columns, got {len(row)}", path=path, line=lineno)
            try:
                scene_id = int(row[0])
                image_id = int(row[1])
                object_id = int(row[2])
                score = float(row[3])
                rot_values = [float(v) for v in row[4].split()]
                t_values = [float(v) for v in row[5].split()]
                time = float(row[6]) if row[6].strip() else None
            except ValueError as exc:
                raise FormatError(f"unparseable field: {exc}", path=path, line=lineno) from exc
            if len(rot_values) != 9:
                raise FormatError(
                    f"R field must hold 9 floats, got {len(rot_values)}", path=path, line=lineno
                )
            if len(t_values) != 3:
                raise FormatError(
                    f"t field must hold 3 floats, got {len(t_values)}", path=path, line=lineno
                )
            try:
                pose = Pose(np.array(rot_values).reshape(3, 3), np.array(t_values))
                record = EstimateRecord(
                    scene_id=scene_id,
                    image_id=image_id,
                    object_id=object_id,
                    score=score,
                    pose=pose,
                    time=time,
                )
            except ValueError as exc:
                raise FormatError(str(exc), path=path, line=lineno) from exc
            out.append(record)
    return out


def write_pose_estimates(path, records) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ESTIMATE_HEADER)
        for record in records:
            writer.writerow(
                [
                    record.scene_id,
                    record.image_id,
                    record.object_id,
                    repr(float(record.score)),
                    " ".join(repr(float(v)) for v in record.pose.rotation.reshape(-1)),
                    " ".join(repr(float(v)) for v in record.pose.translation),
                    "" if record.time is None else repr(float(record.time)),
                ]
            )


def load_detections(path) -> list[tuple[tuple[int, int], BBox]]:
    """Read a detection JSON array into ((scene_id, image_id), BBox) pairs."""
    raw = _load_json(path)
    if not isinstance(raw, list):
        raise FormatError("detections file must hold a JSON array", path=path)
    out = []
    for i, entry in enumerate(raw):
        ctx = {"path": path}
        if not isinstance(entry, dict):
            raise FormatError(f"entry {i} is not an object", **ctx)
        missing = [
            k for k in ("scene_id", "image_id", "category_id", "bbox", "score") if k not in entry
        ]
        if missing:
            raise FormatError(f"entry {i} is missing fields: {', '.join(missing)}", **ctx)
        scene_id = _as_int(entry["scene_id"], f"entry {i}: scene_id", **ctx)
        image_id = _as_int(entry["image_id"], f"entry {i}: image_id", **ctx)
        category_id = _as_int(entry["category_id"], f"entry {i}: category_id", **ctx)
        box_raw = entry["bbox"]
        if not isinstance(box_raw, list) or len(box_raw) != 4:
            raise FormatError(f"entry {i}: bbox must hold 4 values", **ctx)
        x, y, w, h = (_as_number(v, f"entry {i}: bbox entry", **ctx) for v in box_raw)
        if not (w > 0.0 and h > 0.0):
            raise FormatError(f"entry {i}: bbox width and height must be positive", **ctx)
        score = _as_number(entry["score"], f"entry {i}: score", **ctx)
        try:
            box = BBox(x, y, x + w, y + h, class_id=category_id, score=score)
        except ValueError as exc:
            raise FormatError(f"entry {i}: {exc}", **ctx) from exc
        out.append(((scene_id, image_id), box))
    return out


def write_detections(path, entries) -> None:
    """Write ((scene_id, image_id), BBox) pairs as a detection JSON array."""
    payload = []
    for (scene_id, image_id), box in entries:
        payload.append(
            {
                "scene_id": scene_id,
                "image_id": image_id,
                "category_id": box.class_id,
                "bbox": [
                    float(box.x_min),
                    float(box.y_min),
                    float(box.x_max - box.x_min),
                    float(box.y_max - box.y_min),
                ],
                "score": float(box.score),
            }
        )
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
