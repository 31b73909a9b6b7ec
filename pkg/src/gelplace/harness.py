"""Experiment batches: tilt sampling, trial grids, and report tables.

The harness runs grids of placement trials (object x mode x grasp height),
collects per-trial outcomes, and reduces them to the per-cell statistics the
reports use: mean/std of the final tilt error magnitudes plus success counts
at the one and two degree bars.

Reproducibility contract: every trial derives its generator from
``SeedSequence(entropy=seed, spawn_key=(cell, trial, stream))`` with plain
integer keys, so a batch is a pure function of the seed and the scenario
list -- independent of execution order, process and platform.  (Never key
streams on ``hash()`` of a string: string hashing is salted per process.)
The starting-tilt draw uses stream 0, shared by both controller modes, so
the two controllers face identical starting poses trial for trial; sensor
noise uses a mode-specific stream.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .catalog import builtin_catalog
from .controller import MODES, ControllerConfig, run_placement
from .sensors import FTSensorModel, GelSightModel
from .world import RigidObjectSpec

__all__ = [
    "TiltPolicy",
    "Scenario",
    "TrialRecord",
    "BatchStats",
    "DEFAULT_TILT",
    "TILT_OVERRIDES",
    "DEFAULT_SEED",
    "sample_tilt",
    "tilt_policy_for",
    "run_batch",
    "table1_scenarios",
    "table2_scenarios",
    "summarize",
    "emit_report",
    "parse_report",
]

DEFAULT_SEED = 42

# Final tilt errors above this bound mark a batch as failed for reporting
# purposes: mean/std of the error are no longer meaningful and are omitted.
REPORT_ERROR_BOUND_DEG = 2.0

TILT_KINDS = ("fixed", "gaussian_signed")
SIGN_RULES = ("both_positive", "uniform_random_sign", "fixed_sign")


@dataclass(frozen=True)
class TiltPolicy:
    """How a scenario draws the starting tilt of the grasped object.

    ``fixed`` returns the means exactly and draws nothing.
    ``gaussian_signed`` draws each axis from a normal with the given mean
    and variance (deg^2), then applies the sign rule: ``both_positive``
    takes magnitudes, ``fixed_sign`` keeps the draw (the mean's sign
    carries), ``uniform_random_sign`` negates each axis with probability
    one half (one extra uniform draw per axis, roll first).
    """

    kind: str = "gaussian_signed"
    roll_mean_deg: float = 10.0
    pitch_mean_deg: float = 10.0
    variance_deg2: float = 1.0
    sign_rule: str = "uniform_random_sign"

    def __post_init__(self):
        if self.kind not in TILT_KINDS:
            raise ValueError(f"kind must be one of {TILT_KINDS}, got {self.kind!r}")
        if self.sign_rule not in SIGN_RULES:
            raise ValueError(f"sign_rule must be one of {SIGN_RULES}, got {self.sign_rule!r}")
        if self.variance_deg2 < 0.0:
            raise ValueError("variance must be non-negative")

    @property
    def sd_deg(self) -> float:
        return math.sqrt(self.variance_deg2)

    def extremes(self, n_sd: float = 3.0) -> list[tuple[float, float]]:
        """Corner cases of the policy: mean +/- n_sd on each axis, every
        reachable sign combination.  Used by convergence checks."""
        if self.kind == "fixed":
            return [(self.roll_mean_deg, self.pitch_mean_deg)]
        sd = self.sd_deg
        rolls = sorted({self.roll_mean_deg - n_sd * sd, self.roll_mean_deg + n_sd * sd})
        pitches = sorted({self.pitch_mean_deg - n_sd * sd, self.pitch_mean_deg + n_sd * sd})
        if self.sign_rule == "both_positive":
            rolls = [abs(r) for r in rolls]
            pitches = [abs(p) for p in pitches]
        signs = (1.0, -1.0) if self.sign_rule == "uniform_random_sign" else (1.0,)
        return [(sr * r, sp * p)
                for r in rolls for p in pitches for sr in signs for sp in signs]


def sample_tilt(policy: TiltPolicy, rng: np.random.Generator) -> tuple[float, float]:
    """Draw one starting tilt (roll_deg, pitch_deg) under the policy."""
    if policy.kind == "fixed":
        return policy.roll_mean_deg, policy.pitch_mean_deg
    sd = policy.sd_deg
    roll = rng.normal(policy.roll_mean_deg, sd)
    pitch = rng.normal(policy.pitch_mean_deg, sd)
    if policy.sign_rule == "both_positive":
        return abs(roll), abs(pitch)
    if policy.sign_rule == "uniform_random_sign":
        if rng.random() < 0.5:
            roll = -roll
        if rng.random() < 0.5:
            pitch = -pitch
    return roll, pitch


DEFAULT_TILT = TiltPolicy()

# Per-object tilt policies.  Objects with a narrow support footprint or a
# tall grip stall when started too steep: past the angle where the contact
# can no longer generate a corrective torque above the settle threshold the
# start is unrecoverable, so steep-risk objects start inside their
# recoverable cone (a property of the object, not a controller tunable).
# The joint's lopsided head makes the approach direction part of the grasp,
# hence its fixed signs.
TILT_OVERRIDES: dict[str, TiltPolicy] = {
    "joint": TiltPolicy("gaussian_signed", 10.0, -5.0, 1.0, "fixed_sign"),
    "conversion_connector": TiltPolicy("gaussian_signed", 10.0, 3.0, 1.0,
                                       "uniform_random_sign"),
    "hand_cream_tube": TiltPolicy("gaussian_signed", 5.0, 5.0, 1.0,
                                  "uniform_random_sign"),
    "round_bottom_flask": TiltPolicy("gaussian_signed", 5.0, 5.0, 1.0,
                                     "uniform_random_sign"),
    "bottle_with_liquid": TiltPolicy("gaussian_signed", 9.0, 9.0, 1.0,
                                     "uniform_random_sign"),
    "metal_part": TiltPolicy("gaussian_signed", 9.0, 9.0, 1.0,
                             "uniform_random_sign"),
}


def tilt_policy_for(name: str) -> TiltPolicy:
    return TILT_OVERRIDES.get(name, DEFAULT_TILT)


@dataclass(frozen=True)
class Scenario:
    """One cell of an experiment grid: an object, a mode and a tilt policy.

    ``cell`` keys the random streams; scenarios that should face identical
    starting tilts (the two modes of one table cell) share a cell index.

    ``readout_noise_std_deg`` emulates an external pose-measurement system:
    when nonzero, the recorded final errors get independent Gaussian noise
    of that standard deviation.  It defaults off -- the simulator reads
    ground truth -- and the standard tables never enable it.
    """

    cell: int
    label: str
    spec: RigidObjectSpec
    mode: str
    tilt: TiltPolicy = DEFAULT_TILT
    grasp_height: float | None = None
    n_trials: int = 10
    noise: bool = True
    readout_noise_std_deg: float = 0.0

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("a scenario needs at least one trial")
        if self.readout_noise_std_deg < 0.0:
            raise ValueError("readout noise std must be non-negative")


@dataclass(frozen=True)
class TrialRecord:
    """Flat per-trial result row."""

    label: str
    object: str
    mode: str
    grasp_height: float
    trial: int
    tilt_roll_deg: float
    tilt_pitch_deg: float
    final_roll_deg: float
    final_pitch_deg: float
    settled: bool
    timed_out: bool
    toppled: bool
    steps: int
    sim_time_s: float
    backend: str

    @property
    def max_abs_error_deg(self) -> float:
        return max(abs(self.final_roll_deg), abs(self.final_pitch_deg))

    def succeeded(self, bar_deg: float = 1.0) -> bool:
        return (not self.toppled) and self.max_abs_error_deg < bar_deg


@dataclass
class BatchStats:
    """Per-cell reduction of trial records -- the content of one report row.

    ``roll_mean`` .. ``all_std`` are the mean/std (in degrees) of the final
    error magnitudes.  They are ``None`` -- rendered as ``-`` in reports --
    whenever the batch contains a topple or any error beyond
    ``REPORT_ERROR_BOUND_DEG``: averaging over failed placements would
    misrepresent the cell.

    Equality compares exactly the fields a CSV row carries, so
    ``parse_report(emit_report(stats)) == stats``.  ``n`` and ``timeouts``
    are run metadata outside the row format; parsed stats leave them at -1.
    """

    object: str
    grasp_height: float
    mode: str
    roll_mean: float | None
    roll_std: float | None
    pitch_mean: float | None
    pitch_std: float | None
    all_mean: float | None
    all_std: float | None
    lt1: int
    lt2: int
    topples: int
    n: int = field(default=-1, compare=False)
    timeouts: int = field(default=-1, compare=False)

    @classmethod
    def from_records(cls, records: list[TrialRecord]) -> "BatchStats":
        if not records:
            raise ValueError("cannot summarize an empty batch")
        first = records[0]
        for r in records:
            if (r.object, r.grasp_height, r.mode) != (
                first.object, first.grasp_height, first.mode
            ):
                raise ValueError("records from different cells in one batch")
        rolls = [abs(r.final_roll_deg) for r in records]
        pitches = [abs(r.final_pitch_deg) for r in records]
        contaminated = any(r.toppled for r in records) or any(
            e > REPORT_ERROR_BOUND_DEG for e in rolls + pitches
        )
        if contaminated:
            moments = (None,) * 6
        else:
            moments = (
                _mean(rolls), _std(rolls),
                _mean(pitches), _std(pitches),
                _mean(rolls + pitches), _std(rolls + pitches),
            )
        return cls(
            object=first.object,
            grasp_height=first.grasp_height,
            mode=first.mode,
            roll_mean=moments[0], roll_std=moments[1],
            pitch_mean=moments[2], pitch_std=moments[3],
            all_mean=moments[4], all_std=moments[5],
            lt1=sum(r.succeeded(1.0) for r in records),
            lt2=sum(r.succeeded(2.0) for r in records),
            topples=sum(r.toppled for r in records),
            n=len(records),
            timeouts=sum(r.timed_out for r in records),
        )


def _mean(xs: list[float]) -> float:
    return sum(xs) / len(xs)


def _std(xs: list[float]) -> float:
    m = _mean(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / (len(xs) - 1)) if len(xs) > 1 else 0.0


def run_batch(
    scenarios: list[Scenario],
    seed: int = DEFAULT_SEED,
    cfg: ControllerConfig | None = None,
    gel: GelSightModel | None = None,
    ft: FTSensorModel | None = None,
    backend: str = "auto",
) -> list[TrialRecord]:
    """Run every trial of every scenario; returns one record per trial.

    Trial ``t`` of cell ``c`` draws its starting tilt from stream
    ``(c, t, 0)`` and its sensor noise from stream ``(c, t, 1 + mode)``,
    so results do not depend on the order scenarios are listed or run in.
    """
    cfg = cfg if cfg is not None else ControllerConfig()
    gel = gel if gel is not None else GelSightModel()
    ft = ft if ft is not None else FTSensorModel()
    records: list[TrialRecord] = []
    for sc in scenarios:
        if sc.mode not in MODES:
            raise ValueError(f"unknown mode {sc.mode!r}")
        mode_stream = 1 + MODES.index(sc.mode)
        grasp = sc.grasp_height if sc.grasp_height is not None else sc.spec.grasp_height
        for t in range(sc.n_trials):
            tilt_rng = np.random.default_rng(
                np.random.SeedSequence(entropy=seed, spawn_key=(sc.cell, t, 0))
            )
            roll, pitch = sample_tilt(sc.tilt, tilt_rng)
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=seed, spawn_key=(sc.cell, t, mode_stream))
            )
            out = run_placement(
                sc.spec, cfg, sc.mode, roll, pitch, rng,
                gel=gel, ft=ft, grasp_height=grasp, noise=sc.noise,
                backend=backend,
            )
            final_roll = out.final_roll_deg
            final_pitch = out.final_pitch_deg
            if sc.readout_noise_std_deg > 0.0:
                readout_rng = np.random.default_rng(np.random.SeedSequence(
                    entropy=seed, spawn_key=(sc.cell, t, 3 + mode_stream)
                ))
                final_roll += readout_rng.normal(0.0, sc.readout_noise_std_deg)
                final_pitch += readout_rng.normal(0.0, sc.readout_noise_std_deg)
            records.append(TrialRecord(
                label=sc.label,
                object=sc.spec.name,
                mode=sc.mode,
                grasp_height=grasp,
                trial=t,
                tilt_roll_deg=roll,
                tilt_pitch_deg=pitch,
                final_roll_deg=final_roll,
                final_pitch_deg=final_pitch,
                settled=out.settled,
                timed_out=out.timed_out,
                toppled=out.toppled,
                steps=out.steps,
                sim_time_s=out.sim_time_s,
                backend=out.backend,
            ))
    return records


# -- standard grids ---------------------------------------------------------

# Grasp-height study: both square objects at a low and a high grip, fixed
# 10 degree tilt on both axes so every trial differs only in sensor noise.
TABLE1_GRASPS = (0.010, 0.025)
TABLE1_OBJECTS = ("small_rectangular", "large_rectangular")
TABLE1_TILT = TiltPolicy("fixed", 10.0, 10.0, 0.0, "fixed_sign")


def table1_scenarios(n_trials: int = 10, noise: bool = True) -> list[Scenario]:
    catalog = builtin_catalog()
    scenarios = []
    cell = 0
    for name in TABLE1_OBJECTS:
        for grasp in TABLE1_GRASPS:
            for mode in MODES:
                scenarios.append(Scenario(
                    cell=cell,
                    label=f"{name}@{grasp:.3f}",
                    spec=catalog[name],
                    mode=mode,
                    tilt=TABLE1_TILT,
                    grasp_height=grasp,
                    n_trials=n_trials,
                    noise=noise,
                ))
            cell += 1
    return scenarios


def table2_scenarios(n_trials: int = 10, noise: bool = True) -> list[Scenario]:
    """Whole-catalog sweep, every object in both modes at its default grasp."""
    scenarios = []
    for cell, (name, spec) in enumerate(builtin_catalog().items()):
        for mode in MODES:
            scenarios.append(Scenario(
                cell=cell,
                label=name,
                spec=spec,
                mode=mode,
                tilt=tilt_policy_for(name),
                n_trials=n_trials,
                noise=noise,
            ))
    return scenarios


def summarize(records: list[TrialRecord]) -> list[BatchStats]:
    """Group records by (object, grasp, mode) preserving first-seen order."""
    groups: dict[tuple, list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.object, r.grasp_height, r.mode), []).append(r)
    return [BatchStats.from_records(g) for g in groups.values()]


# -- report emission --------------------------------------------------------

CSV_COLUMNS = (
    "object", "grasp_height", "mode",
    "roll_mean", "roll_std", "pitch_mean", "pitch_std",
    "all_mean", "all_std", "lt1", "lt2", "topples",
)


def _cell(v: float | None) -> str:
    # repr keeps the shortest exact decimal form, so parse_report recovers
    # the float bit for bit.
    return "-" if v is None else repr(v)


def emit_report(stats: list[BatchStats], fmt: str = "csv") -> str:
    """Render cell statistics as ``csv`` or an aligned ``txt`` table.

    CSV is the machine format: floats are written at full precision so a
    parse recovers them exactly; ``txt`` is the rounded human-facing table.
    Output is a pure function of the inputs (fixed formatting, ``\\n``
    newlines), so identical runs produce byte-identical reports.
    """
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for s in stats:
            writer.writerow([
                s.object, repr(s.grasp_height), s.mode,
                _cell(s.roll_mean), _cell(s.roll_std),
                _cell(s.pitch_mean), _cell(s.pitch_std),
                _cell(s.all_mean), _cell(s.all_std),
                s.lt1, s.lt2, s.topples,
            ])
        return buf.getvalue()
    if fmt in ("txt", "text"):
        header = ("object", "grasp", "mode", "all err (deg)", "<1deg", "<2deg", "topple")
        rows = [header]
        for s in stats:
            err = "-" if s.all_mean is None else f"{s.all_mean:.3f} +/- {s.all_std:.3f}"
            denom = f"/{s.n}" if s.n >= 0 else ""
            rows.append((s.object, f"{s.grasp_height:.3f}", s.mode, err,
                         f"{s.lt1}{denom}", f"{s.lt2}{denom}", str(s.topples)))
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()
                 for r in rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def parse_report(text: str) -> list[BatchStats]:
    """Read a CSV report back into cell statistics (inverse of emit_report)."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError("not a report CSV (header mismatch)")

    def num(cell: str) -> float | None:
        return None if cell == "-" else float(cell)

    stats = []
    for row in rows[1:]:
        vals = dict(zip(CSV_COLUMNS, row))
        stats.append(BatchStats(
            object=vals["object"],
            grasp_height=float(vals["grasp_height"]),
            mode=vals["mode"],
            roll_mean=num(vals["roll_mean"]), roll_std=num(vals["roll_std"]),
            pitch_mean=num(vals["pitch_mean"]), pitch_std=num(vals["pitch_std"]),
            all_mean=num(vals["all_mean"]), all_std=num(vals["all_std"]),
            lt1=int(vals["lt1"]),
            lt2=int(vals["lt2"]),
            topples=int(vals["topples"]),
        ))
    return stats
