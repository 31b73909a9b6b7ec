"""Built-in object set for the placing experiments.

Eighteen household and lab objects, each reduced to a base contact polygon
(or individual feet), a centre of mass, a mass, and a default grasp height.
Dimensions are rough tape-measure numbers, not CAD; what matters for placing
is the base footprint, how high the grip is, and where the mass sits.

Objects can also be loaded from / saved to JSON so a config file can swap in
a custom set without touching code.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .world import RigidObjectSpec

__all__ = [
    "rect_base",
    "ngon_base",
    "builtin_catalog",
    "catalog_to_json",
    "catalog_from_json",
]


def rect_base(size_x: float, size_y: float) -> np.ndarray:
    """Corner contact points of a rectangular base centred on the origin."""
    hx, hy = size_x / 2.0, size_y / 2.0
    return np.array([[hx, hy], [hx, -hy], [-hx, hy], [-hx, -hy]])


def ngon_base(radius: float, n: int = 12, phase: float = 0.0) -> np.ndarray:
    """Regular-polygon contact ring approximating a circular rim."""
    ang = phase + 2.0 * math.pi * np.arange(n) / n
    return np.column_stack([radius * np.cos(ang), radius * np.sin(ang)])


def builtin_catalog() -> dict[str, RigidObjectSpec]:
    """The default object set, keyed by name."""
    specs = [
        RigidObjectSpec(
            name="small_rectangular",
            contact_points=rect_base(0.030, 0.030),
            height=0.070,
            com=[0.0, 0.0, 0.035],
            mass=0.142,
            grasp_height=0.020,
            notes="3 cm square column, the grasp-height study object",
        ),
        RigidObjectSpec(
            name="large_rectangular",
            contact_points=rect_base(0.050, 0.050),
            height=0.070,
            com=[0.0, 0.0, 0.035],
            mass=0.142,
            grasp_height=0.015,
            notes="5 cm square column, same mass as the small one",
        ),
        RigidObjectSpec(
            name="wooden_rectangular",
            contact_points=rect_base(0.030, 0.050),
            height=0.100,
            com=[0.0, 0.0, 0.050],
            mass=0.150,
            grasp_height=0.035,
        ),
        RigidObjectSpec(
            name="wooden_cylinder",
            contact_points=ngon_base(0.0225),
            height=0.120,
            com=[0.0, 0.0, 0.050],
            mass=0.200,
            grasp_height=0.050,
        ),
        RigidObjectSpec(
            name="beaker",
            contact_points=ngon_base(0.021),
            height=0.090,
            com=[0.0, 0.0, 0.040],
            mass=0.100,
            grasp_height=0.040,
            notes="glass, gripped around the body",
        ),
        RigidObjectSpec(
            name="metal_rectangular",
            contact_points=rect_base(0.060, 0.060),
            height=0.050,
            com=[0.0, 0.0, 0.025],
            mass=0.400,
            grasp_height=0.020,
        ),
        RigidObjectSpec(
            name="v_block",
            contact_points=np.array(
                [[0.015, 0.025], [0.015, -0.025], [-0.015, 0.025], [-0.015, -0.025]]
            ),
            height=0.050,
            com=[0.0, 0.0, 0.020],
            mass=0.500,
            grasp_height=0.040,
            notes="machinist V-block, rests on its two ground rails",
        ),
        RigidObjectSpec(
            name="joint",
            contact_points=rect_base(0.016, 0.016),
            height=0.090,
            com=[0.002, 0.001, 0.035],
            mass=0.300,
            grasp_height=0.018,
            notes="threaded pipe joint gripped at the lower collar: "
                  "the narrowest base in the set",
        ),
        RigidObjectSpec(
            name="lego_blocks",
            contact_points=rect_base(0.032, 0.064),
            height=0.060,
            com=[0.008, 0.004, 0.030],
            mass=0.080,
            grasp_height=0.030,
            notes="stacked bricks, mass biased toward one end",
        ),
        RigidObjectSpec(
            name="metal_object",
            contact_points=rect_base(0.020, 0.020),
            height=0.040,
            com=[0.004, -0.003, 0.018],
            mass=0.300,
            grasp_height=0.018,
        ),
        RigidObjectSpec(
            name="metal_pedestal",
            contact_points=rect_base(0.070, 0.070),
            height=0.030,
            com=[0.0, 0.0, 0.012],
            mass=0.450,
            grasp_height=0.015,
            notes="wide low base on four feet",
        ),
        RigidObjectSpec(
            name="conversion_connector",
            contact_points=rect_base(0.018, 0.040),
            height=0.050,
            com=[0.0, 0.0, 0.022],
            mass=0.060,
            grasp_height=0.030,
            notes="light plug housing with a slim base",
        ),
        RigidObjectSpec(
            name="wood_bond_tube",
            contact_points=rect_base(0.025, 0.060),
            height=0.050,
            com=[0.0, 0.0, 0.020],
            mass=0.120,
            grasp_height=0.025,
            compliance=1.5e-4,
            notes="half-full glue tube lying on its cap edge",
        ),
        RigidObjectSpec(
            name="hand_cream_tube",
            contact_points=rect_base(0.020, 0.040),
            height=0.140,
            com=[0.0, 0.0, 0.045],
            mass=0.090,
            grasp_height=0.035,
            compliance=2.0e-4,
            notes="soft tube standing on its cap",
        ),
        RigidObjectSpec(
            name="test_tube_stand",
            contact_points=rect_base(0.080, 0.060),
            height=0.070,
            com=[0.0, 0.0, 0.035],
            mass=0.250,
            grasp_height=0.035,
        ),
        RigidObjectSpec(
            name="metal_part",
            # tripod footprint, gripped over the footprint centroid
            contact_points=np.array(
                [[0.0433, 0.0], [-0.0217, 0.030], [-0.0217, -0.030]]
            ),
            height=0.040,
            com=[-0.007, 0.002, 0.015],
            mass=0.350,
            grasp_height=0.020,
            notes="tripod footprint casting",
        ),
        RigidObjectSpec(
            name="round_bottom_flask",
            contact_points=ngon_base(0.018, n=6),
            height=0.150,
            com=[0.0, 0.0, 0.060],
            mass=0.250,
            grasp_height=0.050,
            notes="sits on a cork ring; the ring is the contact",
        ),
        RigidObjectSpec(
            name="bottle_with_liquid",
            contact_points=ngon_base(0.0275),
            height=0.180,
            com=[0.0, 0.0, 0.060],
            mass=0.350,
            grasp_height=0.060,
            liquid_gain=0.008,
            liquid_tau=0.5,
            notes="water bottle about half full",
        ),
    ]
    return {s.name: s for s in specs}


def _spec_to_dict(spec: RigidObjectSpec) -> dict:
    return {
        "name": spec.name,
        "contact_points": spec.contact_points.tolist(),
        "height": spec.height,
        "com": spec.com.tolist(),
        "mass": spec.mass,
        "grasp_height": spec.grasp_height,
        "compliance": spec.compliance,
        "liquid_gain": spec.liquid_gain,
        "liquid_tau": spec.liquid_tau,
        "notes": spec.notes,
    }


def catalog_to_json(specs: dict[str, RigidObjectSpec], path) -> None:
    payload = [_spec_to_dict(specs[name]) for name in specs]
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def catalog_from_json(path) -> dict[str, RigidObjectSpec]:
    payload = json.loads(Path(path).read_text())
    specs = {}
    for entry in payload:
        spec = RigidObjectSpec(**entry)
        specs[spec.name] = spec
    return specs
