"""Trial-loop backend selection.

The compiled kernel and the pure Python reference implement the same loop;
the compiled one is preferred when the extension built.  Outcomes are bitwise
identical between the two (enforced by tests), so the choice only affects
speed.  Set ``GELPLACE_BACKEND=python`` or ``=compiled`` to force one.
"""

from __future__ import annotations

import os

from . import _pyloop

try:
    from . import _speedups

    HAVE_COMPILED = hasattr(_speedups, "run_trial")
except ImportError:  # extension not built: fall back to the reference loop
    _speedups = None
    HAVE_COMPILED = False


def _python_runner(params, rng):
    return _pyloop.run_trial(params, rng)


def _compiled_runner(params, rng):
    from .controller import TrialOutcome

    (roll, pitch, settled, timed_out, toppled,
     steps, contact_step, sim_time) = _speedups.run_trial(params, rng)
    return TrialOutcome(
        final_roll_deg=roll,
        final_pitch_deg=pitch,
        settled=settled,
        timed_out=timed_out,
        toppled=toppled,
        steps=steps,
        contact_step=contact_step,
        sim_time_s=sim_time,
        backend="compiled",
    )


_FORCED = os.environ.get("GELPLACE_BACKEND", "").strip().lower()
if _FORCED == "python":
    ACTIVE = "python"
elif _FORCED == "compiled":
    if not HAVE_COMPILED:
        raise ImportError("GELPLACE_BACKEND=compiled but the extension is not built")
    ACTIVE = "compiled"
else:
    ACTIVE = "compiled" if HAVE_COMPILED else "python"


def resolve(requested: str = "auto"):
    """Return (runner, name) for a backend request."""
    name = ACTIVE if requested in ("auto", "", None) else requested
    if name == "python":
        return _python_runner, "python"
    if name == "compiled":
        if not HAVE_COMPILED:
            raise ValueError("compiled backend requested but the extension is not built")
        return _compiled_runner, "compiled"
    raise ValueError(f"unknown backend {requested!r}")
