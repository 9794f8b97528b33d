"""Rotation-matrix helpers: axis-angle exponential map, projection, distances."""

from __future__ import annotations

import numpy as np


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix of a 3-vector: skew(v) @ x == cross(v, x)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rotation_from_axis_angle(rvec: np.ndarray) -> np.ndarray:
    """Rodrigues formula mapping a rotation vector to a rotation matrix.

    The vector direction is the rotation axis and its norm the angle in
    radians. Small angles use the second-order Taylor expansion to avoid
    dividing by a vanishing norm.
    """
    rvec = np.asarray(rvec, dtype=np.float64)
    angle = float(np.linalg.norm(rvec))
    K = skew(rvec)
    if angle < 1e-12:
        return np.eye(3) + K + 0.5 * (K @ K)
    s = np.sin(angle) / angle
    c = (1.0 - np.cos(angle)) / (angle * angle)
    return np.eye(3) + s * K + c * (K @ K)


def closest_rotation(matrix: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix in Frobenius norm (orthonormal, det +1)."""
    u, _, vt = np.linalg.svd(np.asarray(matrix, dtype=np.float64))
    r = u @ vt
    if np.linalg.det(r) < 0.0:
        r = u @ np.diag([1.0, 1.0, -1.0]) @ vt
    return r


def rotation_angle_between(a: np.ndarray, b: np.ndarray) -> float:
    """Geodesic distance between two rotation matrices, in radians."""
    cos_angle = (np.trace(a.T @ b) - 1.0) / 2.0
    return float(np.arccos(np.clip(cos_angle, -1.0, 1.0)))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Random rotation drawn from a QR decomposition of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0.0:
        q[:, 0] = -q[:, 0]
    return q
