"""Quasi-static world: a grasped rigid object pressed against a flat table.

The object is rigidly attached to the end-effector (no slip inside the
gripper).  Table reaction is modelled as a bed of unilateral springs at the
object's contact points, which gives a torque that crosses zero smoothly as
the base face comes flat instead of jumping between edge contacts.  Inertia
is ignored: the end-effector moves exactly as commanded and every wrench is
the static reaction at the current pose.

The force application point is the end-effector origin (midpoint between the
fingertips); all wrenches returned here are expressed about it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .frames import (
    FrameTransform,
    Pose6,
    Wrench,
    compose,
    rpy_to_matrix,
)

__all__ = [
    "GRAVITY",
    "NotInContact",
    "RigidObjectSpec",
    "WorldState",
    "ContactReport",
    "object_pose",
    "effective_com",
    "contact_state",
    "corrective_wrench",
    "gravity_wrench",
    "held_wrench",
    "step",
    "topple_check",
    "placement_error",
    "make_start_state",
]

GRAVITY = 9.81

# per-point unilateral normal stiffness; four points give 5e4 N/m total, so a
# 5 N press settles about 0.1 mm into the foundation
POINT_STIFFNESS = 1.25e4

# softening reference deflection for compliant objects (m)
SOFT_REF_DEFLECTION = 0.005


class NotInContact(Exception):
    """The object is clear of the table, no reaction wrench exists."""


@dataclass
class RigidObjectSpec:
    """Geometry and inertia of one object, in its own base frame.

    The object frame origin sits at the centroid of the base contact points,
    z up.  ``contact_points`` are the (x, y) locations where the base meets
    the table (polygon vertices for a flat face, individual feet otherwise).
    ``com`` is the centre of mass.  ``grasp_height`` is where along z the
    fingertips hold it by default.  ``compliance`` softens transmitted
    contact torque for squishy bodies; ``liquid_gain``/``liquid_tau`` shift
    the centre of mass toward the downhill side with a first-order lag, for
    containers with free liquid.
    """

    name: str
    contact_points: np.ndarray
    height: float
    com: np.ndarray
    mass: float
    grasp_height: float
    compliance: float = 0.0
    liquid_gain: float = 0.0
    liquid_tau: float = 0.5
    notes: str = ""

    def __post_init__(self):
        self.contact_points = np.asarray(self.contact_points, dtype=float).reshape(-1, 2)
        self.com = np.asarray(self.com, dtype=float).reshape(3)
        if self.contact_points.shape[0] < 3:
            raise ValueError(f"{self.name}: need at least 3 contact points")
        if not 0.0 < self.grasp_height <= self.height:
            raise ValueError(f"{self.name}: grasp height outside the object")

    @property
    def grasp_point(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.grasp_height])


@dataclass
class WorldState:
    """Pose of the gripper and its rigid attachment to the object."""

    ee_pose: Pose6
    t_eo: FrameTransform  # object frame expressed in the end-effector frame
    table_z: float = 0.0
    liquid_shift: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        self.liquid_shift = np.asarray(self.liquid_shift, dtype=float).reshape(2)

    def copy(self) -> "WorldState":
        return WorldState(
            self.ee_pose.copy(),
            FrameTransform(self.t_eo.rotation.copy(), self.t_eo.translation.copy()),
            self.table_z,
            self.liquid_shift.copy(),
        )


@dataclass
class ContactReport:
    """Summary of the object/table interface at the current pose.

    ``lever_arm`` is defined so that per-axis reaction torque equals
    ``press_force * lever_arm`` about the application point; it vanishes
    exactly when the application point is plumb over the pressure centroid.
    ``min_gap`` is the clearance of the lowest contact point (negative when
    penetrating the foundation).
    """

    in_contact: bool
    press_force: float
    lever_arm: np.ndarray
    min_gap: float
    n_active: int


def object_pose(state: WorldState) -> Pose6:
    t = compose(FrameTransform.from_pose(state.ee_pose), state.t_eo)
    return Pose6(t.translation, t.rotation)


def effective_com(spec: RigidObjectSpec, state: WorldState) -> np.ndarray:
    """Centre of mass in the object frame, including any liquid shift."""
    com = spec.com.copy()
    com[:2] += state.liquid_shift
    return com


def _contact_points_world(spec: RigidObjectSpec, state: WorldState) -> np.ndarray:
    pose = object_pose(state)
    pts = np.column_stack([spec.contact_points, np.zeros(len(spec.contact_points))])
    return pts @ pose.rotation.T + pose.position


def contact_state(spec: RigidObjectSpec, state: WorldState) -> ContactReport:
    pts = _contact_points_world(spec, state)
    gaps = pts[:, 2] - state.table_z
    pen = np.where(gaps < 0.0, -gaps, 0.0)
    forces = POINT_STIFFNESS * pen
    press = float(forces.sum())
    n_active = int((pen > 0.0).sum())
    if n_active == 0 or press <= 0.0:
        return ContactReport(False, 0.0, np.zeros(2), float(gaps.min()), 0)
    app = state.ee_pose.position
    rel = pts - app
    # torque of the vertical reaction about the application point:
    # tau_x = sum f_i * rel_y, tau_y = -sum f_i * rel_x
    arm = np.array([
        float((forces * rel[:, 1]).sum()) / press,
        float((forces * -rel[:, 0]).sum()) / press,
    ])
    return ContactReport(True, press, arm, float(gaps.min()), n_active)


def _soft_attenuation(spec: RigidObjectSpec, press: float) -> float:
    if spec.compliance <= 0.0:
        return 1.0
    return 1.0 / (1.0 + spec.compliance * press / SOFT_REF_DEFLECTION)


def corrective_wrench(spec: RigidObjectSpec, state: WorldState) -> Wrench:
    """Table-reaction wrench about the application point, end-effector frame.

    The torque is the restoring signal the whole controller runs on: pressing
    a tilted base generates a moment whose sign matches the lever arm of the
    pressure centroid.  Squishy objects transmit an attenuated torque.
    Raises :class:`NotInContact` when the object is clear of the table.
    """
    report = contact_state(spec, state)
    if not report.in_contact:
        raise NotInContact(f"{spec.name} is {report.min_gap * 1e3:.2f} mm clear of the table")
    atten = _soft_attenuation(spec, report.press_force)
    tau_w = np.array([
        report.press_force * report.lever_arm[0] * atten,
        report.press_force * report.lever_arm[1] * atten,
        0.0,
    ])
    f_w = np.array([0.0, 0.0, report.press_force])
    rot_we = state.ee_pose.rotation.T
    return Wrench(rot_we @ f_w, rot_we @ tau_w)


def gravity_wrench(spec: RigidObjectSpec, state: WorldState) -> Wrench:
    """Weight of the held object about the application point, end-effector frame."""
    pose = object_pose(state)
    com_w = pose.rotation @ effective_com(spec, state) + pose.position
    rel = com_w - state.ee_pose.position
    f_w = np.array([0.0, 0.0, -spec.mass * GRAVITY])
    tau_w = np.cross(rel, f_w)
    rot_we = state.ee_pose.rotation.T
    return Wrench(rot_we @ f_w, rot_we @ tau_w)


def held_wrench(spec: RigidObjectSpec, state: WorldState) -> Wrench:
    """Everything the fingertips feel: table reaction plus object weight."""
    try:
        contact = corrective_wrench(spec, state)
    except NotInContact:
        contact = Wrench.zero()
    return contact + gravity_wrench(spec, state)


def _rodrigues(omega: np.ndarray, dt: float) -> np.ndarray:
    angle = float(np.linalg.norm(omega)) * dt
    if angle < 1e-15:
        return np.eye(3)
    axis = omega / np.linalg.norm(omega)
    k = np.array([
        [0.0, -axis[2], axis[1]],
        [axis[2], 0.0, -axis[0]],
        [-axis[1], axis[0], 0.0],
    ])
    return np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


def step(
    spec: RigidObjectSpec,
    state: WorldState,
    linear: np.ndarray,
    angular: np.ndarray,
    dt: float,
) -> WorldState:
    """Advance the end-effector by a commanded twist for one control period.

    Rotation is applied about the end-effector origin (world axes), so a pure
    angular command leaves the application point fixed while the object
    swings under it.  The object stays rigidly attached.  Free liquid, if
    any, relaxes toward the downhill side of the container.
    """
    linear = np.asarray(linear, dtype=float).reshape(3)
    angular = np.asarray(angular, dtype=float).reshape(3)
    new_rot = _rodrigues(angular, dt) @ state.ee_pose.rotation
    new_pos = state.ee_pose.position + linear * dt
    new_state = WorldState(
        Pose6(new_pos, new_rot),
        state.t_eo,
        state.table_z,
        state.liquid_shift.copy(),
    )
    if spec.liquid_gain > 0.0:
        roll, pitch = placement_error(new_state)
        target = spec.liquid_gain * np.array([
            math.sin(math.radians(pitch)),
            -math.sin(math.radians(roll)),
        ])
        tau = max(spec.liquid_tau, dt)
        new_state.liquid_shift = state.liquid_shift + (dt / tau) * (
            target - state.liquid_shift
        )
    return new_state


def topple_check(spec: RigidObjectSpec, state: WorldState) -> bool:
    """Would the object tip over if released at its current tilt?

    Released, the object rests on its downhill-most support point and rotates
    about it; it falls back flat only if the centre of mass is plumb on the
    support side of that pivot.  A tilt beyond 45 degrees counts as toppled
    outright.
    """
    pose = object_pose(state)
    roll, pitch = placement_error(state)
    if math.hypot(roll, pitch) > 45.0:
        return True
    up = pose.rotation @ np.array([0.0, 0.0, 1.0])
    downhill = up[:2].copy()
    norm = float(np.linalg.norm(downhill))
    if norm < 1e-12:
        return False  # flat: resting on the whole base
    downhill /= norm
    pts = _contact_points_world(spec, state)
    com_w = pose.rotation @ effective_com(spec, state) + pose.position
    pivot_proj = float((pts[:, :2] @ downhill).max())
    return float(com_w[:2] @ downhill) > pivot_proj


def placement_error(state: WorldState, sensor_yaw: float = 0.0) -> tuple[float, float]:
    """Tilt of the object base relative to the table, in degrees.

    Computed from the base-plane normal and decomposed as (roll, pitch) on
    the tactile-frame horizontal axes; with zero mount yaw these coincide
    with the world x/y axes.  (0, 0) means the base is parallel to the
    table, and for poses built from a (roll, pitch) pair the decomposition
    round-trips exactly.
    """
    rot = object_pose(state).rotation
    normal = rot @ np.array([0.0, 0.0, 1.0])
    if sensor_yaw != 0.0:
        normal = rpy_to_matrix(0.0, 0.0, -sensor_yaw) @ normal
    roll = math.asin(min(1.0, max(-1.0, -normal[1])))
    pitch = math.atan2(normal[0], normal[2])
    return math.degrees(roll), math.degrees(pitch)


def make_start_state(
    spec: RigidObjectSpec,
    tilt_roll_deg: float,
    tilt_pitch_deg: float,
    grasp_height: float | None = None,
    clearance: float = 0.002,
    table_z: float = 0.0,
) -> WorldState:
    """Grasped object, tilted, hovering just above the table.

    The gripper grabs the object on its centre axis at ``grasp_height``, the
    wrist then rotates about the grip midpoint by the requested tilt, and the
    whole assembly is lifted so the lowest contact point clears the table by
    ``clearance``.  This is the pose at which sensor references are taken.
    """
    g = grasp_height if grasp_height is not None else spec.grasp_height
    if not 0.0 < g <= spec.height:
        raise ValueError(f"grasp height {g} outside {spec.name}")
    tilt = rpy_to_matrix(math.radians(tilt_roll_deg), math.radians(tilt_pitch_deg))
    grasp_obj = np.array([0.0, 0.0, g])
    ee_pose = Pose6(np.array([0.0, 0.0, table_z + g]), tilt)
    t_eo = FrameTransform(np.eye(3), -grasp_obj)
    state = WorldState(ee_pose, t_eo, table_z)
    report = contact_state(spec, state)
    lift = clearance - report.min_gap
    state.ee_pose.position[2] += lift
    return state
