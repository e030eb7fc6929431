"""Minimal rigid-transform and SO(3) helpers (numpy only)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

_ROT_TOL = 1e-9


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix for a unit axis."""
    axis = np.asarray(axis, dtype=float)
    k = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def so3_log(rot: np.ndarray) -> np.ndarray:
    """Axis-angle vector of a rotation matrix; robust near 0 and pi."""
    trace = np.clip((np.trace(rot) - 1.0) / 2.0, -1.0, 1.0)
    angle = float(np.arccos(trace))
    if angle < 1e-10:
        # First order: vee of the skew part.
        return np.array([rot[2, 1] - rot[1, 2], rot[0, 2] - rot[2, 0], rot[1, 0] - rot[0, 1]]) / 2.0
    if angle > np.pi - 1e-6:
        # Near pi the skew part vanishes; recover the axis from the symmetric part.
        sym = (rot + np.eye(3)) / 2.0
        axis = np.sqrt(np.maximum(np.diag(sym), 0.0))
        # Fix signs using the largest component.
        i = int(np.argmax(axis))
        for j in range(3):
            if j != i and sym[i, j] < 0:
                axis[j] = -axis[j]
        norm = np.linalg.norm(axis)
        if norm == 0.0:
            return np.zeros(3)
        return angle * axis / norm
    factor = angle / (2.0 * np.sin(angle))
    return factor * np.array(
        [rot[2, 1] - rot[1, 2], rot[0, 2] - rot[2, 0], rot[1, 0] - rot[0, 1]]
    )


def rpy_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Rotation from roll/pitch/yaw (x, then y, then z, extrinsic)."""
    rx = rotation_about_axis(np.array([1.0, 0.0, 0.0]), roll)
    ry = rotation_about_axis(np.array([0.0, 1.0, 0.0]), pitch)
    rz = rotation_about_axis(np.array([0.0, 0.0, 1.0]), yaw)
    return rz @ ry @ rx


def quat_matrix(w: float, x: float, y: float, z: float) -> np.ndarray:
    """Rotation matrix from a (w, x, y, z) quaternion; normalizes first."""
    q = np.array([w, x, y, z], dtype=float)
    n = np.linalg.norm(q)
    if n == 0.0:
        raise ValidationError("zero-norm quaternion")
    w, x, y, z = q / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def is_rotation(rot: np.ndarray, tol: float = _ROT_TOL) -> bool:
    rot = np.asarray(rot, dtype=float)
    if rot.shape != (3, 3):
        return False
    ortho = np.max(np.abs(rot.T @ rot - np.eye(3)))
    return bool(ortho <= tol and abs(np.linalg.det(rot) - 1.0) <= tol)


@dataclass
class Transform:
    """Proper rigid transform: p_out = rotation @ p_in + translation."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=float)
        self.translation = np.asarray(self.translation, dtype=float)
        if self.rotation.shape != (3, 3) or self.translation.shape != (3,):
            raise ValidationError("transform needs a 3x3 rotation and length-3 translation")

    @staticmethod
    def identity() -> "Transform":
        return Transform()

    def compose(self, other: "Transform") -> "Transform":
        """self applied after other's frame: T_ab.compose(T_bc) = T_ac."""
        return Transform(
            rotation=self.rotation @ other.rotation,
            translation=self.rotation @ other.translation + self.translation,
        )

    def apply(self, point: np.ndarray) -> np.ndarray:
        return self.rotation @ np.asarray(point, dtype=float) + self.translation

    def inverse(self) -> "Transform":
        rt = self.rotation.T
        return Transform(rotation=rt, translation=-rt @ self.translation)

    def almost_equal(self, other: "Transform", tol: float = 1e-12) -> bool:
        return bool(
            np.max(np.abs(self.rotation - other.rotation)) <= tol
            and np.max(np.abs(self.translation - other.translation)) <= tol
        )
