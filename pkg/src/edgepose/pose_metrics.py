"""Rigid poses, 3D model point sets and mean-distance pose accuracy.

The core scores are the mean distance between a model transformed by an
estimated and by a ground-truth pose (``add``) and its symmetric variant
(``add_s``) that pairs every ground-truth point with the closest estimated
point. A pose counts as accurate when its score is strictly below a fixed
fraction of the model diameter, 10% by default.

All coordinates are millimeters throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

ROTATION_TOLERANCE = 1e-9
DEFAULT_THRESHOLD_RATIO = 0.1

# Above this point count the closest-point search switches to a k-d tree;
# both routes are exact nearest-neighbor queries.
_KDTREE_CUTOVER = 512

_BRUTE_CHUNK = 256


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform: 3x3 rotation matrix and translation in millimeters.

    Construction validates orthonormality and det = +1 to 1e-9 per entry;
    matrices outside tolerance are rejected rather than re-orthonormalized.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(-1)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got shape {r.shape}")
        if t.shape != (3,):
            raise ValueError(f"translation must be a 3-vector, got shape {t.shape}")
        if not (np.isfinite(r).all() and np.isfinite(t).all()):
            raise ValueError("pose entries must be finite")
        gram_defect = np.abs(r.T @ r - np.eye(3)).max()
        if gram_defect > ROTATION_TOLERANCE:
            raise ValueError(
                f"rotation is not orthonormal (max |R^T R - I| = {gram_defect:.3e})"
            )
        det_defect = abs(float(np.linalg.det(r)) - 1.0)
        if det_defect > ROTATION_TOLERANCE:
            raise ValueError(f"rotation determinant is off +1 by {det_defect:.3e}")
        r = np.ascontiguousarray(r)
        t = np.ascontiguousarray(t)
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Apply the pose to an (n, 3) array of points."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def compose(self, other: "Pose") -> "Pose":
        """self applied after other: (self ∘ other)(x) = self(other(x))."""
        return Pose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Pose):
            return NotImplemented
        return bool(
            np.array_equal(self.rotation, other.rotation)
            and np.array_equal(self.translation, other.translation)
        )


@dataclass(frozen=True, eq=False)
class ModelPoints:
    """3D model point set with its diameter and symmetry flag.

    Whether an object is scored with the symmetric metric is an input flag;
    it is never inferred from the geometry.
    """

    points: np.ndarray  # (m, 3) float64, millimeters
    diameter: float  # millimeters
    symmetric: bool = False

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must be (m, 3), got shape {pts.shape}")
        if pts.shape[0] < 1:
            raise ValueError("model must contain at least one point")
        if not np.isfinite(pts).all():
            raise ValueError("model points must be finite")
        if not (self.diameter > 0.0):
            raise ValueError(f"diameter must be positive, got {self.diameter}")
        pts = np.ascontiguousarray(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "diameter", float(self.diameter))

    @classmethod
    def from_points(cls, points, symmetric: bool = False) -> "ModelPoints":
        """Build a model computing the diameter from the points themselves."""
        pts = np.asarray(points, dtype=np.float64)
        return cls(points=pts, diameter=model_diameter(pts), symmetric=symmetric)

    def __len__(self) -> int:
        return self.points.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ModelPoints):
            return NotImplemented
        return (
            np.array_equal(self.points, other.points)
            and self.diameter == other.diameter
            and self.symmetric == other.symmetric
        )


@dataclass(frozen=True)
class PoseScore:
    """Distance score in millimeters plus the thresholded accuracy verdict."""

    add_value: float
    accurate: bool


def add(model: ModelPoints, est: Pose, gt: Pose) -> float:
    """Mean distance between the model under the two poses.

    mean over the model points x of ||est(x) - gt(x)||.
    """
    est_pts = est.transform(model.points)
    gt_pts = gt.transform(model.points)
    return float(np.linalg.norm(est_pts - gt_pts, axis=1).mean())


def add_s(model: ModelPoints, est: Pose, gt: Pose, use_kdtree: bool | None = None) -> float:
    """Symmetric mean distance: closest estimated point per ground-truth point.

    mean over x of min over x' of ||est(x') - gt(x)||; never exceeds
    ``add`` on the same input. The k-d tree route is an exact accelerator
    for large models, selected automatically when ``use_kdtree`` is None.
    """
    est_pts = est.transform(model.points)
    gt_pts = gt.transform(model.points)
    if use_kdtree is None:
        use_kdtree = len(model) > _KDTREE_CUTOVER
    if use_kdtree:
        nearest, _ = cKDTree(est_pts).query(gt_pts, k=1)
        return float(nearest.mean())
    mins = np.empty(gt_pts.shape[0], dtype=np.float64)
    for start in range(0, gt_pts.shape[0], _BRUTE_CHUNK):
        chunk = gt_pts[start : start + _BRUTE_CHUNK]
        diff = est_pts[None, :, :] - chunk[:, None, :]
        dists = np.sqrt((diff * diff).sum(axis=2))
        mins[start : start + _BRUTE_CHUNK] = dists.min(axis=1)
    return float(mins.mean())


def score_pose(
    model: ModelPoints,
    est: Pose,
    gt: Pose,
    threshold_ratio: float = DEFAULT_THRESHOLD_RATIO,
) -> PoseScore:
    """Score one estimate: symmetric metric iff the model is flagged symmetric.

    The accuracy comparison is strict: a score exactly at
    threshold_ratio * diameter is inaccurate.
    """
    if not (threshold_ratio > 0.0):
        raise ValueError(f"threshold_ratio must be positive, got {threshold_ratio}")
    value = add_s(model, est, gt) if model.symmetric else add(model, est, gt)
    return PoseScore(add_value=value, accurate=value < threshold_ratio * model.diameter)


def add_recall(scores: Sequence[PoseScore]) -> float:
    """Fraction of scores flagged accurate."""
    if len(scores) == 0:
        raise ValueError("cannot compute recall of an empty score list")
    return sum(1 for s in scores if s.accurate) / len(scores)


def model_diameter(points) -> float:
    """Maximum pairwise Euclidean distance of a point set."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"points must be (m, 3), got shape {pts.shape}")
    if pts.shape[0] < 2:
        raise ValueError("diameter needs at least two points")
    best = 0.0
    for start in range(0, pts.shape[0], _BRUTE_CHUNK):
        chunk = pts[start : start + _BRUTE_CHUNK]
        diff = pts[None, :, :] - chunk[:, None, :]
        dists = np.sqrt((diff * diff).sum(axis=2))
        best = max(best, float(dists.max()))
    return best
