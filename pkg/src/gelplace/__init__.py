"""Tactile-driven stable object placing: simulation, control, experiments.

The package simulates a parallel gripper with a vision-based tactile sensor
(a dot-displacement field on each fingertip) lowering a grasped object onto
a table.  An admittance controller reads either rotation/shear features of
the dot field (``tactile`` mode) or a noisy wrist force-torque sensor
(``ft`` mode) and rotates the grip until the object sits flat.

Typical entry points:

* :func:`run_placement` -- simulate one placement trial.
* :func:`run_batch` / :func:`summarize` / :func:`emit_report` -- experiment
  grids and report tables (also available via the ``gelplace`` CLI).
* :func:`builtin_catalog` -- the 18 built-in object definitions.

Heavy trial loops run on a compiled kernel when the extension module is
available; set ``GELPLACE_BACKEND=python|compiled`` to force a choice.
"""

from .backend import ACTIVE as active_backend_name
from .backend import HAVE_COMPILED
from .catalog import builtin_catalog, catalog_from_json, catalog_to_json
from .controller import MODES, ControllerConfig, TrialOutcome, run_placement
from .frames import (
    FrameTransform,
    Wrench,
    compose,
    invert,
    matrix_to_rpy,
    rpy_to_matrix,
    tactile_to_ee,
    transform_wrench,
)
from .harness import (
    DEFAULT_SEED,
    BatchStats,
    Scenario,
    TiltPolicy,
    TrialRecord,
    emit_report,
    parse_report,
    run_batch,
    sample_tilt,
    summarize,
    table1_scenarios,
    table2_scenarios,
    tilt_policy_for,
)
from .sensors import FTSensorModel, GelSightModel
from .tactile import DotGrid, curl_mean, curl_weights, diff_z, make_grid
from .world import GRAVITY, RigidObjectSpec, make_start_state

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "active_backend_name",
    "HAVE_COMPILED",
    "builtin_catalog",
    "catalog_from_json",
    "catalog_to_json",
    "MODES",
    "ControllerConfig",
    "TrialOutcome",
    "run_placement",
    "FrameTransform",
    "Wrench",
    "compose",
    "invert",
    "matrix_to_rpy",
    "rpy_to_matrix",
    "tactile_to_ee",
    "transform_wrench",
    "DEFAULT_SEED",
    "BatchStats",
    "Scenario",
    "TiltPolicy",
    "TrialRecord",
    "emit_report",
    "parse_report",
    "run_batch",
    "sample_tilt",
    "summarize",
    "table1_scenarios",
    "table2_scenarios",
    "tilt_policy_for",
    "FTSensorModel",
    "GelSightModel",
    "DotGrid",
    "curl_mean",
    "curl_weights",
    "diff_z",
    "make_grid",
    "GRAVITY",
    "RigidObjectSpec",
    "make_start_state",
]
