"""Sensor response models: gel fingertip cameras and the wrist force/torque cell.

Gel model.  The grasped object drags the dot arrays with it.  Torque about
the face normal (pitch axis) rotates both fields in the shared face plane;
torque about the roll axis shears the two faces vertically in opposite
directions; the press force adds a common-mode vertical shear.  Per-dot
matching jitter and per-trial dot dropout are the noise terms.  Gains are in
millimetres of dot travel per unit load.

F/T model.  True wrench at the mount, plus white noise, plus a cable-strain
bias proportional to wrist tilt; first-order low-pass; quantisation to the
device resolution (1/2000 of rating per count); minus a software offset that
was captured as a single device reading.  The mount sits above the
fingertips, so transporting the reading down to the application point turns
force noise into torque noise through the lever arm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .frames import FrameTransform, Wrench, transform_wrench
from .tactile import DotField, DotGrid, make_grid

__all__ = [
    "DoubleCapture",
    "NotCaptured",
    "GelSightModel",
    "GelReference",
    "gel_respond",
    "gel_sample_dropout",
    "gel_snapshot",
    "gel_displacements",
    "FTSensorModel",
    "FTSensorState",
    "ft_true_at_sensor",
    "ft_capture_offset",
    "ft_read",
    "ft_to_application_point",
    "ft_reset",
]


class DoubleCapture(Exception):
    """The software offset was already captured for this trial."""


class NotCaptured(Exception):
    """Reading before the offset capture makes no sense in this pipeline."""


# ---------------------------------------------------------------------------
# gel fingertips


@dataclass
class GelSightModel:
    """Linear dot-displacement response of the two gel faces.

    ``shear_gain`` converts the vertical force couple resisting roll torque
    (torque / face separation) into face shear, ``rot_gain`` converts pitch
    torque into field rotation (mean curl is ``-rot_gain * tau_pitch``),
    ``press_gain`` converts press force into common-mode vertical drag.
    """

    grid: DotGrid = field(default_factory=make_grid)
    shear_gain: float = 0.05      # mm per N of opposed vertical load
    rot_gain: float = 0.5         # curl per N m of pitch torque
    press_gain: float = 0.02      # mm per N of press force
    face_separation: float = 0.016  # m between the two gel surfaces
    jitter_std: float = 0.005     # mm, per dot per axis matching noise
    dropout_rate: float = 0.05    # per-trial probability a dot is never tracked
    curl_neighbors: int = 8       # neighbourhood size of the gradient fits

    @property
    def n_dots(self) -> int:
        return self.grid.n_dots


@dataclass
class GelReference:
    """Fields captured at the reference snapshot, one per face."""

    u_first: np.ndarray
    u_second: np.ndarray
    valid_first: np.ndarray
    valid_second: np.ndarray


def _face_field(model: GelSightModel, wrench: Wrench, press: float, face_sign: float) -> np.ndarray:
    """Noiseless dot displacements on one face (mm), tactile-frame wrench."""
    xy = model.grid.xy
    tau_roll, tau_pitch = float(wrench.torque[0]), float(wrench.torque[1])
    # in-plane rotation whose mean curl is -rot_gain * tau_pitch
    c = 0.5 * model.rot_gain * tau_pitch
    u = np.column_stack([c * xy[:, 1], -c * xy[:, 0]])
    # opposed vertical shear from roll torque, common-mode drag from the press
    u[:, 1] += face_sign * model.shear_gain * tau_roll / model.face_separation
    u[:, 1] += model.press_gain * press
    # tangential force drags both faces sideways (common mode, feature-neutral)
    u[:, 0] += model.press_gain * float(wrench.force[0])
    return u


def gel_sample_dropout(model: GelSightModel, rng: np.random.Generator):
    """Per-trial validity masks, first face drawn before the second."""
    valid_first = rng.random(model.n_dots) >= model.dropout_rate
    valid_second = rng.random(model.n_dots) >= model.dropout_rate
    return valid_first, valid_second


def gel_respond(
    model: GelSightModel,
    wrench: Wrench,
    press: float,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Instantaneous dot displacements for both faces, with matching jitter.

    Draw order (first face then second, each dot x then z) is part of the
    contract: the simulation kernels reproduce it draw for draw.
    """
    u1 = _face_field(model, wrench, press, +1.0)
    u2 = _face_field(model, wrench, press, -1.0)
    if rng is not None and model.jitter_std > 0.0:
        u1 = u1 + rng.normal(0.0, model.jitter_std, size=u1.shape)
        u2 = u2 + rng.normal(0.0, model.jitter_std, size=u2.shape)
    return u1, u2


def gel_snapshot(
    model: GelSightModel,
    wrench: Wrench,
    press: float,
    valid_first: np.ndarray,
    valid_second: np.ndarray,
    rng: np.random.Generator | None = None,
) -> GelReference:
    """Record the reference fields; later readings are relative to these.

    Whatever load (including gravity of the held object) acts at snapshot
    time is baked into the reference and subtracts out of every following
    frame.
    """
    u1, u2 = gel_respond(model, wrench, press, rng)
    return GelReference(u1, u2, np.asarray(valid_first, bool), np.asarray(valid_second, bool))


def gel_displacements(
    model: GelSightModel,
    ref: GelReference,
    wrench: Wrench,
    press: float,
    rng: np.random.Generator | None = None,
) -> tuple[DotField, DotField]:
    """Displacement fields relative to the reference snapshot."""
    u1, u2 = gel_respond(model, wrench, press, rng)
    return (
        DotField(u1 - ref.u_first, ref.valid_first),
        DotField(u2 - ref.u_second, ref.valid_second),
    )


# ---------------------------------------------------------------------------
# wrist force/torque cell


@dataclass
class FTSensorModel:
    """Noise, filtering and quantisation of the wrist-mounted F/T cell."""

    rated_force: float = 500.0
    rated_torque: float = 4.0
    resolution: float = 1.0 / 2000.0   # counts: one part in 2000 of rating
    noise_std_force: float = 0.5       # N, white, per axis
    noise_std_torque: float = 0.02     # N m, white, per axis
    bias_per_rad: tuple[float, float] = (0.08, 0.08)  # N m per rad of wrist roll/pitch
    cutoff_hz: float = 5.0
    sample_rate_hz: float = 200.0
    mount_offset_z: float = 0.06       # m from application point up to the cell

    @property
    def force_step(self) -> float:
        return self.rated_force * self.resolution

    @property
    def torque_step(self) -> float:
        return self.rated_torque * self.resolution

    @property
    def filter_alpha(self) -> float:
        dt = 1.0 / self.sample_rate_hz
        tau = 1.0 / (2.0 * math.pi * self.cutoff_hz)
        return dt / (tau + dt)


@dataclass
class FTSensorState:
    """Filter memory and the captured software offset."""

    filt: np.ndarray = field(default_factory=lambda: np.zeros(6))
    offset: np.ndarray = field(default_factory=lambda: np.zeros(6))
    captured: bool = False


def ft_true_at_sensor(model: FTSensorModel, wrench_ee: Wrench) -> Wrench:
    """Transport the true fingertip wrench up to the cell's own frame."""
    t = FrameTransform(np.eye(3), [0.0, 0.0, -model.mount_offset_z])
    return transform_wrench(wrench_ee, t)


def ft_to_application_point(model: FTSensorModel, wrench_sensor: Wrench) -> Wrench:
    """Transport a cell-frame wrench down to the application point."""
    t = FrameTransform(np.eye(3), [0.0, 0.0, model.mount_offset_z])
    return transform_wrench(wrench_sensor, t)


def _raw_sample(
    model: FTSensorModel,
    true_sensor: Wrench,
    wrist_rpy: tuple[float, float],
    rng: np.random.Generator | None,
    noisy: bool,
) -> np.ndarray:
    raw = true_sensor.as_array().copy()
    if noisy and rng is not None:
        for i in range(3):
            raw[i] += rng.normal(0.0, model.noise_std_force)
        for i in range(3, 6):
            raw[i] += rng.normal(0.0, model.noise_std_torque)
    raw[3] += model.bias_per_rad[0] * wrist_rpy[0]
    raw[4] += model.bias_per_rad[1] * wrist_rpy[1]
    return raw


def _quantize(values: np.ndarray, model: FTSensorModel) -> np.ndarray:
    out = values.copy()
    out[:3] = np.round(out[:3] / model.force_step) * model.force_step
    out[3:] = np.round(out[3:] / model.torque_step) * model.torque_step
    return out


def ft_capture_offset(
    model: FTSensorModel,
    state: FTSensorState,
    true_sensor: Wrench,
    wrist_rpy: tuple[float, float] = (0.0, 0.0),
    rng: np.random.Generator | None = None,
    noisy: bool = True,
) -> None:
    """Record the current device output as the software zero.

    One single reading, exactly as an operator zeroing the cell before the
    placing motion: its noise becomes a DC error on every subsequent sample.
    The filter is primed with the same sample so readings start settled.
    Raises :class:`DoubleCapture` on a second capture without a reset.
    """
    if state.captured:
        raise DoubleCapture("offset already captured; call ft_reset first")
    raw = _raw_sample(model, true_sensor, wrist_rpy, rng, noisy)
    state.filt = raw.copy()
    state.offset = _quantize(raw, model)
    state.captured = True


def ft_read(
    model: FTSensorModel,
    state: FTSensorState,
    true_sensor: Wrench,
    wrist_rpy: tuple[float, float] = (0.0, 0.0),
    rng: np.random.Generator | None = None,
    noisy: bool = True,
) -> Wrench:
    """One filtered, quantised, offset-subtracted reading (cell frame).

    Draw order per sample: force x, y, z then torque x, y, z.
    """
    if not state.captured:
        raise NotCaptured("capture the offset before reading")
    raw = _raw_sample(model, true_sensor, wrist_rpy, rng, noisy)
    state.filt = state.filt + model.filter_alpha * (raw - state.filt)
    return Wrench.from_array(_quantize(state.filt, model) - state.offset)


def ft_reset(state: FTSensorState) -> None:
    """Clear filter memory and the captured offset."""
    state.filt = np.zeros(6)
    state.offset = np.zeros(6)
    state.captured = False
