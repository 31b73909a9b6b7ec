"""Command-line front end for the placing experiments.

Subcommands
-----------
``table1``   grasp-height ablation grid (2 objects x 2 grips x 2 modes)
``table2``   whole-catalog sweep (every object x 2 modes)
``run``      a single scenario: one object, one mode, optional fixed tilt
``catalog``  list the built-in objects and their properties

Common flags: ``--seed`` (u64), ``--config`` (JSON overrides), ``--out``
(directory for report + per-trial CSV), ``--format csv|txt``, ``--backend``,
``--trials``, ``--no-noise``.

``table1``/``table2`` accept ``--check``: after the run the emitted table is
checked against the expected success-count shape (see ``CHECKS`` below) and
the process exits with status 2 if any expectation fails, 0 otherwise.

Config file schema (all sections and keys optional; unknown keys rejected)::

    {
      "controller": {"k_z": 0.002, "k_roll": 0.8, ... ControllerConfig fields},
      "gelsight":   {"shear_gain": 0.05, ...,
                     "grid": {"rows": 7, "cols": 9, "pitch_mm": 2.0}},
      "ft":         {"noise_std_torque": 0.02, "bias_per_rad": [0.08, 0.08],
                     ... FTSensorModel fields}
    }
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from pathlib import Path

import numpy as np

from .catalog import builtin_catalog
from .controller import MODES, ControllerConfig
from .harness import (
    DEFAULT_SEED,
    Scenario,
    TiltPolicy,
    emit_report,
    run_batch,
    summarize,
    table1_scenarios,
    table2_scenarios,
    tilt_policy_for,
)
from .sensors import FTSensorModel, GelSightModel
from .tactile import make_grid

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CHECK_FAILED = 2


# -- config loading ----------------------------------------------------------


def _build_dataclass(cls, data: dict, what: str):
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"unknown {what} keys: {sorted(unknown)}; "
                         f"allowed: {sorted(allowed)}")
    return cls(**data)


def load_config(path: str | None):
    """Read the JSON config file into the three model objects."""
    if path is None:
        return ControllerConfig(), GelSightModel(), FTSensorModel()
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ValueError("config root must be a JSON object")
    unknown = set(raw) - {"controller", "gelsight", "ft"}
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}; "
                         "allowed: ['controller', 'ft', 'gelsight']")
    cfg = _build_dataclass(ControllerConfig, raw.get("controller", {}), "controller")
    gel_data = dict(raw.get("gelsight", {}))
    grid_spec = gel_data.pop("grid", None)
    if grid_spec is not None:
        extra = set(grid_spec) - {"rows", "cols", "pitch_mm"}
        if extra:
            raise ValueError(f"unknown grid keys: {sorted(extra)}")
        gel_data["grid"] = make_grid(**grid_spec)
    gel = _build_dataclass(GelSightModel, gel_data, "gelsight")
    ft_data = dict(raw.get("ft", {}))
    if "bias_per_rad" in ft_data:
        ft_data["bias_per_rad"] = tuple(ft_data["bias_per_rad"])
    ft = _build_dataclass(FTSensorModel, ft_data, "ft")
    return cfg, gel, ft


# -- output plumbing ---------------------------------------------------------


def trials_csv(records) -> str:
    cols = [f.name for f in dataclasses.fields(records[0])] if records else []
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for r in records:
        writer.writerow([getattr(r, c) for c in cols])
    return buf.getvalue()


def write_outputs(out_dir: str | None, stem: str, report: str, fmt: str, records):
    if out_dir is None:
        return
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ext = "csv" if fmt == "csv" else "txt"
    (out / f"{stem}.{ext}").write_text(report)
    (out / f"{stem}_trials.csv").write_text(trials_csv(records))


# -- self-checks -------------------------------------------------------------


def _find(stats, obj, grasp, mode):
    for s in stats:
        if s.object == obj and s.mode == mode and (
            grasp is None or abs(s.grasp_height - grasp) < 1e-12
        ):
            return s
    raise KeyError((obj, grasp, mode))


def check_table1(stats) -> list[str]:
    """Expected shape of the grasp-height study, as success-count assertions."""
    bad = []
    for obj in ("small_rectangular", "large_rectangular"):
        for grasp in (0.010, 0.025):
            s = _find(stats, obj, grasp, "tactile")
            if s.lt1 != s.n:
                bad.append(f"tactile {obj}@{grasp}: {s.lt1}/{s.n} under 1 deg")
    for grasp in (0.010, 0.025):
        s = _find(stats, "large_rectangular", grasp, "ft")
        if s.lt1 != s.n:
            bad.append(f"ft large_rectangular@{grasp}: {s.lt1}/{s.n} under 1 deg")
    lo = _find(stats, "small_rectangular", 0.010, "ft")
    hi = _find(stats, "small_rectangular", 0.025, "ft")
    if not (hi.lt1 < lo.lt1 < lo.n):
        bad.append(
            "ft small_rectangular: expected success(2.5cm) < success(1.0cm) < "
            f"{lo.n}, got {hi.lt1} vs {lo.lt1}"
        )
    return bad


def check_table2(stats) -> list[str]:
    """Expected shape of the catalog sweep."""
    bad = []
    tact = [s for s in stats if s.mode == "tactile"]
    ft = [s for s in stats if s.mode == "ft"]
    for s in tact:
        if s.lt2 != s.n:
            bad.append(f"tactile {s.object}: {s.lt2}/{s.n} under 2 deg")
        if s.lt1 < round(0.8 * s.n):
            bad.append(f"tactile {s.object}: {s.lt1}/{s.n} under 1 deg")
    imperfect = sum(1 for s in tact if s.lt1 != s.n)
    if imperfect > 1:
        bad.append(f"tactile: {imperfect} objects below 10/10 under 1 deg (allowed: 1)")
    if not sum(s.lt1 for s in ft) < sum(s.lt1 for s in tact):
        bad.append("ft aggregate successes not strictly below tactile aggregate")
    return bad


CHECKS = {"table1": check_table1, "table2": check_table2}


# -- subcommands -------------------------------------------------------------


def _run_table(name: str, scenarios, args) -> int:
    cfg, gel, ft = load_config(args.config)
    records = run_batch(scenarios, seed=args.seed, cfg=cfg, gel=gel, ft=ft,
                        backend=args.backend)
    stats = summarize(records)
    report = emit_report(stats, fmt=args.format)
    sys.stdout.write(report)
    write_outputs(args.out, name, report, args.format, records)
    if args.check:
        problems = CHECKS[name](stats)
        if problems:
            for p in problems:
                print(f"check failed: {p}", file=sys.stderr)
            return EXIT_CHECK_FAILED
        print(f"{name} self-check passed", file=sys.stderr)
    return EXIT_OK


def cmd_table1(args) -> int:
    return _run_table("table1", table1_scenarios(args.trials, not args.no_noise), args)


def cmd_table2(args) -> int:
    return _run_table("table2", table2_scenarios(args.trials, not args.no_noise), args)


def cmd_run(args) -> int:
    catalog = builtin_catalog()
    if args.object not in catalog:
        print(f"unknown object {args.object!r}; see `gelplace catalog`",
              file=sys.stderr)
        return EXIT_ERROR
    spec = catalog[args.object]
    if (args.tilt_roll is None) != (args.tilt_pitch is None):
        print("--tilt-roll and --tilt-pitch must be given together",
              file=sys.stderr)
        return EXIT_ERROR
    if args.tilt_roll is not None:
        tilt = TiltPolicy("fixed", args.tilt_roll, args.tilt_pitch, 0.0, "fixed_sign")
    else:
        tilt = tilt_policy_for(args.object)
    cfg, gel, ft = load_config(args.config)
    scenario = Scenario(
        cell=0, label=args.object, spec=spec, mode=args.mode, tilt=tilt,
        grasp_height=args.grasp_height, n_trials=args.trials,
        noise=not args.no_noise,
    )
    records = run_batch([scenario], seed=args.seed, cfg=cfg, gel=gel, ft=ft,
                        backend=args.backend)
    for r in records:
        status = "toppled" if r.toppled else ("timeout" if r.timed_out else "settled")
        print(f"trial {r.trial}: start ({r.tilt_roll_deg:+.2f}, "
              f"{r.tilt_pitch_deg:+.2f}) deg -> final ({r.final_roll_deg:+.3f}, "
              f"{r.final_pitch_deg:+.3f}) deg  [{status}, {r.steps} steps, "
              f"{r.backend}]")
    report = emit_report(summarize(records), fmt=args.format)
    sys.stdout.write(report)
    write_outputs(args.out, f"run_{args.object}_{args.mode}", report,
                  args.format, records)
    return EXIT_OK


def cmd_catalog(args) -> int:
    rows = [("name", "base[m]", "height[m]", "mass[kg]", "grasp[m]", "notes")]
    for name, spec in builtin_catalog().items():
        xs = spec.contact_points[:, 0]
        ys = spec.contact_points[:, 1]
        base = f"{xs.max() - xs.min():.3f}x{ys.max() - ys.min():.3f}"
        rows.append((name, base, f"{spec.height:.3f}", f"{spec.mass:.3f}",
                     f"{spec.grasp_height:.3f}", spec.notes))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]) - 1)]
    for r in rows:
        lead = "  ".join(c.ljust(w) for c, w in zip(r[:-1], widths))
        print(f"{lead}  {r[-1]}")
    return EXIT_OK


# -- argument parsing --------------------------------------------------------


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                   help="base seed for all random streams (default %(default)s)")
    p.add_argument("--config", metavar="PATH",
                   help="JSON file overriding controller/sensor parameters")
    p.add_argument("--out", metavar="DIR",
                   help="directory to write the report and per-trial CSV into")
    p.add_argument("--format", choices=("csv", "txt"), default="csv",
                   help="report format (default %(default)s)")
    p.add_argument("--backend", choices=("auto", "python", "compiled"),
                   default="auto", help="simulation kernel (default %(default)s)")
    p.add_argument("--trials", type=int, default=10,
                   help="trials per cell (default %(default)s)")
    p.add_argument("--no-noise", action="store_true",
                   help="disable all sensor noise sources")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gelplace",
        description="Tactile stable-placing simulation: experiment batches "
                    "and reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("table1", "grasp-height ablation on the two square objects"),
        ("table2", "full catalog sweep, both control modes"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.add_argument("--check", action="store_true",
                       help="verify the expected success-count shape; "
                            "exit 2 if violated")
        p.set_defaults(func=cmd_table1 if name == "table1" else cmd_table2)

    p = sub.add_parser("run", help="run one object in one mode")
    _add_common(p)
    p.add_argument("--object", required=True, help="catalog object name")
    p.add_argument("--mode", choices=MODES, default="tactile")
    p.add_argument("--grasp-height", type=float, default=None,
                   help="grip height above the base [m] (default: catalog value)")
    p.add_argument("--tilt-roll", type=float, default=None,
                   help="fixed starting roll [deg] (default: object's tilt policy)")
    p.add_argument("--tilt-pitch", type=float, default=None,
                   help="fixed starting pitch [deg]")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("catalog", help="list the built-in objects")
    p.set_defaults(func=cmd_catalog)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
