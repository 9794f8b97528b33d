"""Pose recovery from 2D-3D point pairings under a pinhole camera.

The solver chains a direct linear transform initialization with a damped
least-squares refinement of the reprojection error over a 6-parameter
local pose: a right-multiplied axis-angle rotation increment plus a
translation increment. The damping factor grows tenfold on rejected steps
and shrinks tenfold on accepted ones, so the objective never increases.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    BehindCameraError,
    DegenerateGeometryError,
    FormatError,
    InitializationError,
    InsufficientDataError,
)
from .pose_metrics import Pose
from .rotation import closest_rotation, rotation_from_axis_angle, skew

MIN_CORRESPONDENCES = 6
MIN_DEPTH = 1e-9

DEFAULT_MAX_ITERATIONS = 100
DEFAULT_GRADIENT_TOL = 1e-10
DEFAULT_STEP_TOL = 1e-12
DEFAULT_INITIAL_DAMPING = 1e-3
DEFAULT_CONDITION_LIMIT = 1e12

_CORRESPONDENCE_HEADER = ["x3d", "y3d", "z3d", "u", "v"]


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics: focal lengths and principal point, in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0.0 and self.fy > 0.0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True, eq=False)
class Correspondence:
    """A 3D model point (millimeters) paired with its 2D pixel observation."""

    point3d: np.ndarray
    point2d: np.ndarray

    def __post_init__(self):
        p3 = np.asarray(self.point3d, dtype=np.float64).reshape(-1)
        p2 = np.asarray(self.point2d, dtype=np.float64).reshape(-1)
        if p3.shape != (3,) or p2.shape != (2,):
            raise ValueError("correspondence needs a 3D point and a 2D point")
        if not (np.isfinite(p3).all() and np.isfinite(p2).all()):
            raise ValueError("correspondence coordinates must be finite")
        p3.setflags(write=False)
        p2.setflags(write=False)
        object.__setattr__(self, "point3d", p3)
        object.__setattr__(self, "point2d", p2)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Correspondence):
            return NotImplemented
        return bool(
            np.array_equal(self.point3d, other.point3d)
            and np.array_equal(self.point2d, other.point2d)
        )


@dataclass(frozen=True)
class PnPResult:
    pose: Pose
    reprojection_rmse: float  # pixels
    iterations: int
    converged: bool


def project(pose: Pose, intrinsics: CameraIntrinsics, point) -> np.ndarray:
    """Project one 3D point to pixel coordinates; depth must be positive."""
    return project_points(pose, intrinsics, np.asarray(point, dtype=np.float64).reshape(1, 3))[0]


def project_points(pose: Pose, intrinsics: CameraIntrinsics, points: np.ndarray) -> np.ndarray:
    """Project an (n, 3) array of model points to (n, 2) pixel coordinates."""
    cam = pose.transform(points)
    depths = cam[:, 2]
    if np.any(depths <= MIN_DEPTH):
        bad = int(np.argmin(depths))
        raise BehindCameraError(
            f"point {bad} projects at depth {depths[bad]:.6g} mm (must be > {MIN_DEPTH})"
        )
    uv = np.empty((cam.shape[0], 2), dtype=np.float64)
    uv[:, 0] = intrinsics.fx * (cam[:, 0] / depths) + intrinsics.cx
    uv[:, 1] = intrinsics.fy * (cam[:, 1] / depths) + intrinsics.cy
    return uv


def reprojection_rmse(pose: Pose, intrinsics: CameraIntrinsics, correspondences) -> float:
    """Root mean square of 2D residual norms over the correspondences."""
    pts3d, pts2d = _stack(correspondences)
    projected = project_points(pose, intrinsics, pts3d)
    sq = ((projected - pts2d) ** 2).sum(axis=1)
    return float(np.sqrt(sq.mean()))


def _stack(correspondences) -> tuple[np.ndarray, np.ndarray]:
    if len(correspondences) == 0:
        raise InsufficientDataError("no correspondences given")
    pts3d = np.stack([c.point3d for c in correspondences])
    pts2d = np.stack([c.point2d for c in correspondences])
    return pts3d, pts2d


def _dlt_initialize(
    pts3d: np.ndarray,
    pts2d: np.ndarray,
    intrinsics: CameraIntrinsics,
    condition_limit: float,
) -> Pose:
    """Direct linear transform on the normalized projection equations.

    Solves for the 3x4 pose matrix up to scale, fixes the sign by positive
    mean depth, and projects the rotation block to the closest rotation.
    """
    n = pts3d.shape[0]
    xn = (pts2d[:, 0] - intrinsics.cx) / intrinsics.fx
    yn = (pts2d[:, 1] - intrinsics.cy) / intrinsics.fy

    # Center and scale the 3D points for conditioning.
    centroid = pts3d.mean(axis=0)
    centered = pts3d - centroid
    scale = float(np.sqrt((centered**2).sum(axis=1).mean()))
    if scale <= 0.0:
        raise DegenerateGeometryError("3D points are coincident")
    scaled = centered / scale

    a = np.zeros((2 * n, 12), dtype=np.float64)
    homog = np.hstack([scaled, np.ones((n, 1))])
    a[0::2, 0:4] = homog
    a[0::2, 8:12] = -xn[:, None] * homog
    a[1::2, 4:8] = homog
    a[1::2, 8:12] = -yn[:, None] * homog

    _, sigma, vt = np.linalg.svd(a)
    if sigma[10] <= 0.0 or sigma[0] / sigma[10] > condition_limit:
        raise DegenerateGeometryError(
            "correspondence geometry is rank deficient "
            f"(condition {sigma[0] / max(sigma[10], np.finfo(float).tiny):.3e})"
        )
    m = vt[-1].reshape(3, 4)

    # Undo the 3D normalization: columns 0:3 act on scaled points.
    a3 = m[:, :3] / scale
    b = m[:, 3] - a3 @ centroid

    depths = pts3d @ a3.T[:, 2] + b[2]
    if depths.sum() < 0.0:
        a3, b = -a3, -b
        depths = -depths

    lam = float(np.linalg.svd(a3, compute_uv=False).mean())
    if lam <= 0.0:
        raise DegenerateGeometryError("rotation block of the linear solution collapsed")
    r0 = closest_rotation(a3)
    t0 = b / lam

    depths = pts3d @ r0[2] + t0[2]
    if not np.any(depths > MIN_DEPTH):
        raise InitializationError("all points project behind the camera at initialization")
    if np.any(depths <= MIN_DEPTH):
        raise InitializationError(
            f"{int((depths <= MIN_DEPTH).sum())} of {n} points project behind "
            "the camera at initialization"
        )
    return Pose(r0, t0)


def _residuals_and_jacobian(
    rot: np.ndarray,
    t: np.ndarray,
    pts3d: np.ndarray,
    pts2d: np.ndarray,
    intrinsics: CameraIntrinsics,
) -> tuple[np.ndarray, np.ndarray]:
    """Stacked reprojection residuals and their analytic Jacobian.

    Parameter order: axis-angle increment (right multiplied) then
    translation increment.
    """
    cam = pts3d @ rot.T + t
    z = cam[:, 2]
    u = intrinsics.fx * cam[:, 0] / z + intrinsics.cx
    v = intrinsics.fy * cam[:, 1] / z + intrinsics.cy
    res = np.column_stack([u, v]) - pts2d

    n = pts3d.shape[0]
    jac = np.zeros((2 * n, 6), dtype=np.float64)
    for i in range(n):
        d_cam = np.hstack([-rot @ skew(pts3d[i]), np.eye(3)])  # 3x6
        zi = z[i]
        du = np.array([intrinsics.fx / zi, 0.0, -intrinsics.fx * cam[i, 0] / (zi * zi)])
        dv = np.array([0.0, intrinsics.fy / zi, -intrinsics.fy * cam[i, 1] / (zi * zi)])
        jac[2 * i] = du @ d_cam
        jac[2 * i + 1] = dv @ d_cam
    return res.reshape(-1), jac


def _objective(rot, t, pts3d, pts2d, intrinsics) -> float:
    """Sum of squared residuals; infinite when any depth is non-positive."""
    cam = pts3d @ rot.T + t
    z = cam[:, 2]
    if np.any(z <= MIN_DEPTH):
        return float("inf")
    u = intrinsics.fx * cam[:, 0] / z + intrinsics.cx
    v = intrinsics.fy * cam[:, 1] / z + intrinsics.cy
    return float(((u - pts2d[:, 0]) ** 2 + (v - pts2d[:, 1]) ** 2).sum())


def _refine(
    initial: Pose,
    pts3d: np.ndarray,
    pts2d: np.ndarray,
    intrinsics: CameraIntrinsics,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    gradient_tol: float = DEFAULT_GRADIENT_TOL,
    step_tol: float = DEFAULT_STEP_TOL,
    initial_damping: float = DEFAULT_INITIAL_DAMPING,
    objective_trace: list | None = None,
) -> tuple[np.ndarray, np.ndarray, int, bool]:
    """Damped least-squares loop; accepts only objective-decreasing steps."""
    rot = initial.rotation.copy()
    t = initial.translation.copy()
    value = _objective(rot, t, pts3d, pts2d, intrinsics)
    if not np.isfinite(value):
        raise InitializationError("initial pose leaves points behind the camera")
    if objective_trace is not None:
        objective_trace.append(value)

    damping = initial_damping
    iterations = 0
    converged = False
    for _ in range(max_iterations):
        iterations += 1
        res, jac = _residuals_and_jacobian(rot, t, pts3d, pts2d, intrinsics)
        grad = jac.T @ res
        if np.linalg.norm(grad) < gradient_tol:
            converged = True
            break
        hess = jac.T @ jac
        step_converged = False
        accepted = False
        while damping <= 1e15:
            try:
                delta = np.linalg.solve(hess + damping * np.eye(6), -grad)
            except np.linalg.LinAlgError:
                damping *= 10.0
                continue
            if np.linalg.norm(delta) < step_tol:
                step_converged = True
                break
            cand_rot = rot @ rotation_from_axis_angle(delta[:3])
            cand_t = t + delta[3:]
            cand_value = _objective(cand_rot, cand_t, pts3d, pts2d, intrinsics)
            if cand_value < value:
                rot, t, value = cand_rot, cand_t, cand_value
                damping = max(damping / 10.0, 1e-15)
                accepted = True
                if objective_trace is not None:
                    objective_trace.append(value)
                break
            damping *= 10.0
        if step_converged:
            converged = True
            break
        if not accepted:
            break  # damping exhausted without an acceptable step
    return rot, t, iterations, converged


def solve_pnp(
    correspondences,
    intrinsics: CameraIntrinsics,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    gradient_tol: float = DEFAULT_GRADIENT_TOL,
    step_tol: float = DEFAULT_STEP_TOL,
    condition_limit: float = DEFAULT_CONDITION_LIMIT,
) -> PnPResult:
    """Recover a pose from at least six 2D-3D correspondences.

    Linear initialization followed by damped least-squares refinement of
    the reprojection error. The returned rotation satisfies the pose
    invariants and the reported RMSE is recomputed from the final pose.
    """
    pts3d, pts2d = _stack(correspondences)
    if pts3d.shape[0] < MIN_CORRESPONDENCES:
        raise InsufficientDataError(
            f"need at least {MIN_CORRESPONDENCES} correspondences, got {pts3d.shape[0]}"
        )
    initial = _dlt_initialize(pts3d, pts2d, intrinsics, condition_limit)
    rot, t, iterations, converged = _refine(
        initial,
        pts3d,
        pts2d,
        intrinsics,
        max_iterations=max_iterations,
        gradient_tol=gradient_tol,
        step_tol=step_tol,
    )
    pose = Pose(closest_rotation(rot), t)
    rmse = reprojection_rmse(pose, intrinsics, correspondences)
    return PnPResult(pose=pose, reprojection_rmse=rmse, iterations=iterations, converged=converged)


def load_correspondences_csv(path) -> list[Correspondence]:
    """Read a correspondence file: header x3d,y3d,z3d,u,v, one pair per row."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("empty correspondence file", path=path) from None
        if header != _CORRESPONDENCE_HEADER:
            raise FormatError(
                f"expected header {','.join(_CORRESPONDENCE_HEADER)!r}, got {','.join(header)!r}",
                path=path,
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise FormatError(f"expected 5 columns, got {len(row)}", path=path, line=lineno)
            try:
                values = [float(v) for v in row]
            except ValueError as exc:
                raise FormatError(f"unparseable number: {exc}", path=path, line=lineno) from exc
            try:
                out.append(Correspondence(point3d=values[:3], point2d=values[3:]))
            except ValueError as exc:
                raise FormatError(str(exc), path=path, line=lineno) from exc
    return out


def write_correspondences_csv(path, correspondences) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CORRESPONDENCE_HEADER)
        for c in correspondences:
            writer.writerow([repr(float(v)) for v in (*c.point3d, *c.point2d)])


def load_intrinsics_json(path) -> CameraIntrinsics:
    """Read a JSON object with fields fx, fy, cx, cy."""
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc}", path=path) from exc
    if not isinstance(raw, dict):
        raise FormatError("intrinsics file must hold a JSON object", path=path)
    missing = [k for k in ("fx", "fy", "cx", "cy") if k not in raw]
    if missing:
        raise FormatError(f"missing fields: {', '.join(missing)}", path=path)
    try:
        return CameraIntrinsics(
            fx=float(raw["fx"]), fy=float(raw["fy"]), cx=float(raw["cx"]), cy=float(raw["cy"])
        )
    except (TypeError, ValueError) as exc:
        raise FormatError(str(exc), path=path) from exc


def write_intrinsics_json(path, intrinsics: CameraIntrinsics) -> None:
    with open(path, "w") as fh:
        json.dump(
            {"fx": intrinsics.fx, "fy": intrinsics.fy, "cx": intrinsics.cx, "cy": intrinsics.cy},
            fh,
            indent=2,
        )
        fh.write("\n")
