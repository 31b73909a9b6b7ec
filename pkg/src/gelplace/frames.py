"""Rigid-body frames, poses and wrench algebra.

Conventions used throughout the package:

* world frame is z-up, gravity along -z
* rotations are stored as 3x3 matrices; the roll/pitch/yaw helpers use the
  fixed-axis x-y-z convention, ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``
* a wrench is (force, torque) expressed in a named frame; transforming a
  wrench to a displaced frame picks up the d x F moment term
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Pose6",
    "Wrench",
    "FrameTransform",
    "rot_x",
    "rot_y",
    "rot_z",
    "rpy_to_matrix",
    "matrix_to_rpy",
    "transform_wrench",
    "compose",
    "invert",
    "apply_to_point",
    "tactile_to_ee",
]

_EYE3 = np.eye(3)


def rot_x(angle: float) -> np.ndarray:
    """Rotation matrix about the x axis (radians)."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    """Rotation matrix about the y axis (radians)."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    """Rotation matrix about the z axis (radians)."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rpy_to_matrix(roll: float, pitch: float, yaw: float = 0.0) -> np.ndarray:
    """Rotation from roll/pitch/yaw about the fixed x, y, z axes (in that order)."""
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def matrix_to_rpy(rot: np.ndarray) -> tuple[float, float, float]:
    """Inverse of :func:`rpy_to_matrix`.

    Returns (roll, pitch, yaw) with pitch in [-pi/2, pi/2].  At the
    pitch = +-pi/2 singularity yaw is reported as 0 and roll absorbs the
    remaining rotation.
    """
    # row 2 of R is (-sin p, cos p sin r, cos p cos r)
    sp = -float(rot[2, 0])
    sp = min(1.0, max(-1.0, sp))
    pitch = math.asin(sp)
    if abs(sp) > 1.0 - 1e-12:
        # gimbal lock: R[0,1], R[1,1] still determine roll -/+ yaw
        roll = math.atan2(-float(rot[0, 1]) * math.copysign(1.0, sp), float(rot[1, 1]))
        yaw = 0.0
    else:
        roll = math.atan2(float(rot[2, 1]), float(rot[2, 2]))
        yaw = math.atan2(float(rot[1, 0]), float(rot[0, 0]))
    return roll, pitch, yaw


def _as_vec3(v) -> np.ndarray:
    out = np.asarray(v, dtype=float).reshape(3)
    return out


def _check_rotation(rot: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    rot = np.asarray(rot, dtype=float)
    if rot.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got {rot.shape}")
    err = np.abs(rot.T @ rot - _EYE3).max()
    if err > tol or np.linalg.det(rot) < 0.0:
        raise ValueError(f"matrix is not a proper rotation (orthogonality error {err:.2e})")
    return rot


@dataclass
class Pose6:
    """Position and orientation of a body frame in a parent frame."""

    position: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        self.position = _as_vec3(self.position)
        self.rotation = _check_rotation(self.rotation)

    @classmethod
    def from_rpy(cls, position, roll: float, pitch: float, yaw: float = 0.0) -> "Pose6":
        return cls(position, rpy_to_matrix(roll, pitch, yaw))

    def rpy(self) -> tuple[float, float, float]:
        return matrix_to_rpy(self.rotation)

    def copy(self) -> "Pose6":
        return Pose6(self.position.copy(), self.rotation.copy())


@dataclass
class Wrench:
    """Force/torque pair expressed in some frame, about that frame's origin."""

    force: np.ndarray
    torque: np.ndarray

    def __post_init__(self):
        self.force = _as_vec3(self.force)
        self.torque = _as_vec3(self.torque)

    @classmethod
    def zero(cls) -> "Wrench":
        return cls(np.zeros(3), np.zeros(3))

    @classmethod
    def from_array(cls, arr) -> "Wrench":
        arr = np.asarray(arr, dtype=float).reshape(6)
        return cls(arr[:3], arr[3:])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.force, self.torque])

    def __add__(self, other: "Wrench") -> "Wrench":
        return Wrench(self.force + other.force, self.torque + other.torque)

    def __sub__(self, other: "Wrench") -> "Wrench":
        return Wrench(self.force - other.force, self.torque - other.torque)

    def __mul__(self, scale: float) -> "Wrench":
        return Wrench(self.force * scale, self.torque * scale)

    __rmul__ = __mul__


@dataclass
class FrameTransform:
    """Pose of a source frame expressed in a target frame.

    ``rotation`` maps source-frame vectors into the target frame and
    ``translation`` is the source origin's position in the target frame.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.rotation = _check_rotation(self.rotation)
        self.translation = _as_vec3(self.translation)

    @classmethod
    def identity(cls) -> "FrameTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_pose(cls, pose: Pose6) -> "FrameTransform":
        return cls(pose.rotation.copy(), pose.position.copy())


def transform_wrench(w: Wrench, t: FrameTransform) -> Wrench:
    """Re-express a wrench measured in the source frame in the target frame.

    The force rotates; the torque rotates and picks up the moment of the
    rotated force about the target origin::

        F = R F'
        tau = R tau' + d x (R F')

    where d is the source origin's position in the target frame.
    """
    f = t.rotation @ w.force
    tau = t.rotation @ w.torque + np.cross(t.translation, f)
    return Wrench(f, tau)


def compose(t_ab: FrameTransform, t_bc: FrameTransform) -> FrameTransform:
    """Transform of frame C in frame A, from C-in-B and B-in-A."""
    return FrameTransform(
        t_ab.rotation @ t_bc.rotation,
        t_ab.rotation @ t_bc.translation + t_ab.translation,
    )


def invert(t: FrameTransform) -> FrameTransform:
    """Inverse transform (target frame expressed in the source frame)."""
    rot_inv = t.rotation.T
    return FrameTransform(rot_inv.copy(), -(rot_inv @ t.translation))


def apply_to_point(t: FrameTransform, point) -> np.ndarray:
    """Map a point from the source frame into the target frame."""
    return t.rotation @ _as_vec3(point) + t.translation


def tactile_to_ee(sensor_yaw: float = 0.0) -> FrameTransform:
    """Transform from the touch-sensor frame to the end-effector frame.

    The sensor frame shares the end-effector origin (midpoint between the
    fingertips) and is rotated about the common z axis by the mounting yaw.
    With zero yaw the frames coincide, so pseudo-torques read off the sensor
    map one-to-one onto the end-effector roll/pitch axes.
    """
    return FrameTransform(rot_z(sensor_yaw), np.zeros(3))
