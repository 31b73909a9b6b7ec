"""Admittance placing controller and the per-trial simulation entry point.

The control law is a diagonal admittance: commanded twist proportional to the
error between the measured and target wrench at the application point.  Only
three channels are active: vertical force (regulated to the press target) and
the two horizontal torques (regulated to zero).  What differs between the two
modes is where the torque estimate comes from:

* ``tactile`` - pseudo-torques computed from the gel dot fields: mean field
  curl for the pitch axis, face height difference for the roll axis.
* ``ft`` - torque read from the wrist force/torque cell, transported down to
  the application point.

Commanded rates are clamped component-wise before integration; clamping is a
safety property of the executor, not part of the admittance law itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .frames import Wrench, invert, tactile_to_ee, transform_wrench
from .sensors import FTSensorModel, GelSightModel
from .world import RigidObjectSpec

__all__ = [
    "ControllerConfig",
    "MODES",
    "TrialOutcome",
    "admittance_step",
    "tactile_pseudo_wrench",
    "settled_tail",
    "run_placement",
    "active_backend",
]

MODES = ("tactile", "ft")

# runaway guard: a trial aborts as toppled once the tilt magnitude exceeds the
# starting tilt by this much while the release test fails (degrees)
TOPPLE_GUARD_MARGIN = 5.0


@dataclass
class ControllerConfig:
    """Gains, rates and termination thresholds of the placing loop."""

    # admittance gains: m/s per N and rad/s per N m
    k_z: float = 0.002
    k_roll: float = 0.8
    k_pitch: float = 0.8
    # wrench target: press the table with this reaction force
    f_target_z: float = 5.0
    # feature-to-torque conversion for the tactile mode
    curl_gain: float = 2.0      # N m per unit of mean curl
    curl_sign: float = -1.0     # mean curl of the field runs opposite the pitch torque
    diff_gain: float = 0.16     # N m per mm of face height difference
    diff_sign: float = 1.0
    sensor_yaw: float = 0.0
    # approach phase
    descent_speed: float = 0.005
    contact_trigger: float = 1.0
    clearance: float = 0.002
    # rates; the tactile features are sampled-and-held at camera rate, and
    # that hold sets the loop stability margin (k * stiffness * hold period
    # must stay below 2 for the stiffest flat contact in the object set)
    control_rate_hz: float = 200.0
    tactile_rate_hz: float = 50.0
    # executor clamps
    max_linear_rate: float = 0.02
    max_angular_rate: float = 0.03
    # termination
    settle_epsilon: float = 0.01
    settle_window_s: float = 0.5
    timeout_s: float = 15.0

    @property
    def control_dt(self) -> float:
        return 1.0 / self.control_rate_hz

    @property
    def tactile_every(self) -> int:
        return max(1, int(round(self.control_rate_hz / self.tactile_rate_hz)))

    @property
    def settle_window_steps(self) -> int:
        return max(1, int(round(self.settle_window_s * self.control_rate_hz)))


@dataclass
class TrialOutcome:
    """What one placement attempt ended as."""

    final_roll_deg: float
    final_pitch_deg: float
    settled: bool
    timed_out: bool
    toppled: bool
    steps: int
    contact_step: int          # -1 when contact never triggered
    sim_time_s: float
    backend: str = ""
    telemetry: dict | None = None

    @property
    def max_abs_error_deg(self) -> float:
        return max(abs(self.final_roll_deg), abs(self.final_pitch_deg))


def admittance_step(cfg: ControllerConfig, measured: Wrench, target: Wrench):
    """Commanded twist from the wrench error, before any clamping.

    Linear in the error: doubling (measured - target) doubles the twist, and
    the commanded twist is zero exactly at the target wrench.
    """
    err_f = measured.force - target.force
    err_t = measured.torque - target.torque
    linear = np.array([0.0, 0.0, cfg.k_z * err_f[2]])
    angular = np.array([cfg.k_roll * err_t[0], cfg.k_pitch * err_t[1], 0.0])
    return linear, angular


def tactile_pseudo_wrench(cfg: ControllerConfig, curl: float, diff: float, f_z: float) -> Wrench:
    """Assemble the control wrench the tactile mode feeds the admittance law.

    Features live in the sensor frame; the result is expressed on the
    end-effector axes through the mount yaw.
    """
    tau_roll = cfg.diff_sign * cfg.diff_gain * diff
    tau_pitch = cfg.curl_sign * cfg.curl_gain * curl
    w_sensor = Wrench([0.0, 0.0, f_z], [tau_roll, tau_pitch, 0.0])
    return transform_wrench(w_sensor, tactile_to_ee(cfg.sensor_yaw))


def ee_wrench_to_tactile(cfg: ControllerConfig, w_ee: Wrench) -> Wrench:
    """The load the gel faces feel, expressed on the sensor axes."""
    return transform_wrench(w_ee, invert(tactile_to_ee(cfg.sensor_yaw)))


def settled_tail(values, epsilon: float) -> int:
    """Length of the trailing run with |value| below epsilon."""
    n = 0
    for v in reversed(list(values)):
        if abs(v) < epsilon:
            n += 1
        else:
            break
    return n


@dataclass
class TrialParams:
    """Flat, backend-agnostic bundle of everything one trial needs."""

    spec: RigidObjectSpec
    cfg: ControllerConfig
    gel: GelSightModel
    ft: FTSensorModel
    mode: str
    tilt_roll_deg: float
    tilt_pitch_deg: float
    grasp_height: float
    noise: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.cfg.sensor_yaw != 0.0:
            raise ValueError("trials assume the default sensor mount (zero yaw)")


def _resolve_backend(requested: str):
    from . import backend

    return backend.resolve(requested)


def active_backend() -> str:
    from . import backend

    return backend.ACTIVE


def run_placement(
    spec: RigidObjectSpec,
    cfg: ControllerConfig,
    mode: str,
    tilt_roll_deg: float,
    tilt_pitch_deg: float,
    rng: np.random.Generator,
    gel: GelSightModel | None = None,
    ft: FTSensorModel | None = None,
    grasp_height: float | None = None,
    noise: bool = True,
    telemetry: bool = False,
    backend: str = "auto",
) -> TrialOutcome:
    """Simulate one tilted-start placement attempt to termination.

    The trial consumes the generator's stream in a fixed order (dropout
    masks, gel reference jitter, cell offset capture, then per-step sensor
    noise), so outcomes are reproducible from the seed alone and identical
    across backends.  Telemetry recording always runs on the pure Python
    reference loop.
    """
    params = TrialParams(
        spec=spec,
        cfg=cfg,
        gel=gel if gel is not None else GelSightModel(),
        ft=ft if ft is not None else FTSensorModel(),
        mode=mode,
        tilt_roll_deg=tilt_roll_deg,
        tilt_pitch_deg=tilt_pitch_deg,
        grasp_height=grasp_height if grasp_height is not None else spec.grasp_height,
        noise=noise,
    )
    if telemetry:
        from . import _pyloop

        return _pyloop.run_trial(params, rng, telemetry=True)
    runner, name = _resolve_backend(backend)
    out = runner(params, rng)
    out.backend = name
    return out
