"""Dot-displacement fields on the gel fingertips and the two control features.

Each fingertip camera tracks a printed array of black dots on the gel surface.
Displacements are measured in the face plane, whose coordinates are the
tactile-frame x (horizontal) and z (vertical) axes; both faces share these
axes, i.e. there is no per-camera mirroring.  Two scalar features summarise a
field pair:

* ``curl_mean`` - mean discrete curl of one face's field,
  d(u_z)/dx - d(u_x)/dz, estimated per dot by an affine least-squares fit
  over its nearest valid neighbours.  Rotational slip about the face normal
  (the pitch axis) shows up here.
* ``diff_z`` - difference of the mean vertical displacement between the two
  faces.  Opposed vertical shear (torque about the roll axis) shows up here.

Units are millimetres throughout this module.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MatchingDegenerate",
    "DegenerateGeometry",
    "DotGrid",
    "DotField",
    "make_grid",
    "match_dots",
    "curl_weights",
    "curl_mean",
    "diff_z",
    "field_to_csv",
    "field_from_csv",
    "DEFAULT_ROWS",
    "DEFAULT_COLS",
    "DEFAULT_PITCH_MM",
    "DEFAULT_NEIGHBORS",
]

DEFAULT_ROWS = 7
DEFAULT_COLS = 9
DEFAULT_PITCH_MM = 2.0
DEFAULT_NEIGHBORS = 8

MIN_VALID_MATCH = 4
MIN_VALID_CURL = 6


class MatchingDegenerate(Exception):
    """Too few dots could be matched to say anything about the field."""


class DegenerateGeometry(Exception):
    """The valid dots do not span enough of the plane to estimate gradients."""


@dataclass
class DotGrid:
    """Rest positions of the dot array on one gel face, (n, 2) as (x, z) mm."""

    xy: np.ndarray
    rows: int
    cols: int

    def __post_init__(self):
        self.xy = np.asarray(self.xy, dtype=float).reshape(-1, 2)

    @property
    def n_dots(self) -> int:
        return self.xy.shape[0]


@dataclass
class DotField:
    """Measured displacement of each dot on one face, with a validity mask."""

    u: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float).reshape(-1, 2)
        self.valid = np.asarray(self.valid, dtype=bool).reshape(-1)
        if self.valid.shape[0] != self.u.shape[0]:
            raise ValueError("mask length does not match field length")

    @property
    def n_valid(self) -> int:
        return int(self.valid.sum())


def make_grid(
    rows: int = DEFAULT_ROWS,
    cols: int = DEFAULT_COLS,
    pitch_mm: float = DEFAULT_PITCH_MM,
) -> DotGrid:
    """Regular dot array centred on the face origin."""
    if rows < 2 or cols < 2:
        raise ValueError("need at least a 2x2 dot array")
    xs = (np.arange(cols) - (cols - 1) / 2.0) * pitch_mm
    zs = (np.arange(rows) - (rows - 1) / 2.0) * pitch_mm
    gx, gz = np.meshgrid(xs, zs)
    return DotGrid(np.column_stack([gx.ravel(), gz.ravel()]), rows, cols)


def match_dots(grid: DotGrid, observed: np.ndarray, max_disp_mm: float = 1.5) -> DotField:
    """Associate observed dot centroids with rest positions.

    Greedy injective nearest-neighbour matching in ascending distance order,
    gated at ``max_disp_mm``.  Rest dots without a partner inside the gate are
    masked invalid (occluded or detection failure).  Raises
    :class:`MatchingDegenerate` when fewer than four dots match.
    """
    observed = np.asarray(observed, dtype=float).reshape(-1, 2)
    n, m = grid.n_dots, observed.shape[0]
    u = np.zeros((n, 2))
    valid = np.zeros(n, dtype=bool)
    if m > 0:
        d = np.linalg.norm(grid.xy[:, None, :] - observed[None, :, :], axis=2)
        order = np.argsort(d, axis=None, kind="stable")
        used_obs = np.zeros(m, dtype=bool)
        for flat in order:
            i, j = divmod(int(flat), m)
            if d[i, j] > max_disp_mm:
                break
            if valid[i] or used_obs[j]:
                continue
            u[i] = observed[j] - grid.xy[i]
            valid[i] = True
            used_obs[j] = True
    if int(valid.sum()) < MIN_VALID_MATCH:
        raise MatchingDegenerate(
            f"only {int(valid.sum())} dots matched (need {MIN_VALID_MATCH})"
        )
    return DotField(u, valid)


def _neighborhoods(xy: np.ndarray, valid: np.ndarray, k: int):
    """Each valid dot's k nearest valid neighbours (excluding itself).

    Returns ``(centers, nbrs)``: the valid dot indices and an aligned
    ``(len(centers), take)`` index matrix.  Every valid dot has the same
    number of valid others, so the neighbourhoods are uniform and the
    downstream fits can run batched.  Distance ties are broken by dot index
    so the selection is deterministic.
    """
    centers = np.flatnonzero(valid)
    pts = xy[centers]
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2)
    # sort each row by (distance, dot index); the center itself is unique at
    # distance zero and lands in column 0, which is dropped
    order = np.lexsort((np.broadcast_to(centers, d2.shape), d2), axis=-1)
    take = min(k, len(centers) - 1)
    return centers, centers[order[:, 1:take + 1]]


def curl_weights(
    grid: DotGrid,
    valid: np.ndarray,
    k: int = DEFAULT_NEIGHBORS,
) -> tuple[np.ndarray, np.ndarray]:
    """Linear weights (w_z, w_x) with mean curl = w_z . u_z + w_x . u_x.

    The per-dot affine fit depends only on geometry and the validity mask, so
    for a fixed mask the whole feature collapses to two dot products.  Fits
    whose normal matrix is singular (collinear neighbourhoods) are dropped;
    if every fit drops, or fewer than :data:`MIN_VALID_CURL` dots are valid,
    :class:`DegenerateGeometry` is raised.
    """
    valid = np.asarray(valid, dtype=bool).reshape(-1)
    xy = grid.xy
    if int(valid.sum()) < MIN_VALID_CURL:
        raise DegenerateGeometry(f"only {int(valid.sum())} valid dots (need {MIN_VALID_CURL})")
    spread = xy[valid] - xy[valid].mean(axis=0)
    if np.linalg.matrix_rank(spread, tol=1e-9) < 2:
        raise DegenerateGeometry("valid dots are collinear")

    centers, nbrs = _neighborhoods(xy, valid, k)
    # one affine fit per valid dot over itself and its neighbours; the
    # neighbourhoods are uniform in size, so all fits run as one batch
    pts = np.concatenate([centers[:, None], nbrs], axis=1)    # (m, k+1)
    rel = xy[pts] - xy[centers, None, :]                      # (m, k+1, 2)
    design = np.concatenate([np.ones(rel.shape[:2] + (1,)), rel], axis=2)
    normal = np.matmul(design.transpose(0, 2, 1), design)     # (m, 3, 3)
    keep = np.abs(np.linalg.det(normal)) >= 1e-9
    if not keep.any():
        raise DegenerateGeometry("no dot admits a non-singular gradient fit")
    # rows 1 and 2 of (X^T X)^-1 X^T give the two gradient components
    grad = np.linalg.solve(normal[keep],
                           design[keep].transpose(0, 2, 1))[:, 1:, :]
    n_fits = int(keep.sum())
    w_z = np.zeros(grid.n_dots)
    w_x = np.zeros(grid.n_dots)
    np.add.at(w_z, pts[keep].ravel(), (grad[:, 0, :] / n_fits).ravel())
    np.add.at(w_x, pts[keep].ravel(), (-grad[:, 1, :] / n_fits).ravel())
    return w_z, w_x


def curl_mean(field: DotField, grid: DotGrid, k: int = DEFAULT_NEIGHBORS) -> float:
    """Mean discrete curl of one face's displacement field (1/unit-length

    scale cancels: displacements and coordinates are both in mm, so the
    result is dimensionless rotation, positive counter-clockwise in the
    (x, z) plane).
    """
    w_z, w_x = curl_weights(grid, field.valid, k)
    return float(w_z @ field.u[:, 1] + w_x @ field.u[:, 0])


def diff_z(first: DotField, second: DotField) -> float:
    """Mean vertical displacement of the first face minus the second face."""
    for name, f in (("first", first), ("second", second)):
        if f.n_valid == 0:
            raise MatchingDegenerate(f"{name} face has no valid dots")
    return float(first.u[first.valid, 1].mean() - second.u[second.valid, 1].mean())


def field_to_csv(field: DotField, grid: DotGrid) -> str:
    """Serialise one face's field as CSV (x, z, ux, uz, valid)."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["x_mm", "z_mm", "ux_mm", "uz_mm", "valid"])
    for i in range(grid.n_dots):
        writer.writerow([
            f"{grid.xy[i, 0]:.6f}",
            f"{grid.xy[i, 1]:.6f}",
            f"{field.u[i, 0]:.9f}",
            f"{field.u[i, 1]:.9f}",
            int(field.valid[i]),
        ])
    return buf.getvalue()


def field_from_csv(text: str) -> tuple[DotGrid, DotField]:
    """Inverse of :func:`field_to_csv` (row/col counts are not recovered)."""
    rows = list(csv.reader(io.StringIO(text)))
    body = rows[1:]
    xy = np.array([[float(r[0]), float(r[1])] for r in body])
    u = np.array([[float(r[2]), float(r[3])] for r in body])
    valid = np.array([bool(int(r[4])) for r in body])
    return DotGrid(xy, rows=0, cols=0), DotField(u, valid)
