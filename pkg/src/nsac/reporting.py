"""Run artifacts: step report tables and field snapshots.

Reports go to CSV with 17 significant digits so that reruns of the same
configuration can be compared byte for byte.  Fields go to legacy-format
VTK files on the once-refined vertex set, where every quadratic degree of
freedom is a point; any VTK reader can display them without knowing the
element order.
"""

from __future__ import annotations

import math

import numpy as np

from .assembly import Discretization

CSV_HEADER = ("step,time,iters,ns_solves,max_abs_phi,"
              "E_u_step,E_phi_step,K_hat,monitors_passed")


def _fmt(value) -> str:
    """Locale-independent cell formatting; missing values spell ``nan``."""
    if value is None:
        return "nan"
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    return "%.17g" % v


def _step_khat(report):
    est = report.contraction
    if est is None or est.degenerate:
        return None
    return est.geometric_fit


def step_csv_lines(reports) -> list:
    """CSV lines for a run: header, one row per step, and a summary row.

    The summary row repeats the per-step layout with aggregates: totals in
    the count columns, maxima in the error and bound columns, and the
    conjunction in the monitor column.  A zero-step run still produces the
    header and a summary row of ``nan`` sentinels.
    """
    lines = [CSV_HEADER]
    for r in reports:
        e_u = r.error_norms[0] if r.error_norms is not None else None
        e_phi = r.error_norms[1] if r.error_norms is not None else None
        lines.append(",".join([
            _fmt(r.step_index), _fmt(r.time), _fmt(r.fixed_point_iterations),
            _fmt(r.ns_solves), _fmt(r.max_abs_phi), _fmt(e_u), _fmt(e_phi),
            _fmt(_step_khat(r)), _fmt(bool(r.monitors_passed)),
        ]))

    if reports:
        e_us = [r.error_norms[0] for r in reports if r.error_norms is not None]
        e_phis = [r.error_norms[1] for r in reports
                  if r.error_norms is not None]
        khats = [k for k in (_step_khat(r) for r in reports) if k is not None]
        summary = [
            "summary", _fmt(reports[-1].time),
            _fmt(sum(r.fixed_point_iterations for r in reports)),
            _fmt(sum(r.ns_solves for r in reports)),
            _fmt(max(r.max_abs_phi for r in reports)),
            _fmt(max(e_us) if e_us else None),
            _fmt(max(e_phis) if e_phis else None),
            _fmt(max(khats) if khats else None),
            _fmt(all(r.monitors_passed for r in reports)),
        ]
    else:
        summary = ["summary"] + ["nan"] * 8
    lines.append(",".join(summary))
    return lines


def emit_step_csv(reports, path) -> None:
    """Write the step report table to ``path``."""
    text = "\n".join(step_csv_lines(reports)) + "\n"
    with open(path, "w", newline="") as handle:
        handle.write(text)


def _pressure_on_refined_grid(disc: Discretization, p: np.ndarray):
    """Linear pressure sampled at every refined grid point.

    The refined grid doubles the mesh resolution, so each new point is a
    vertex or the midpoint of a vertex pair (edge or cell diagonal); the
    linear interpolant there is the mean of the pair.
    """
    n = disc.mesh.n_subdivisions
    m = 2 * n + 1
    grid = np.full((m, m), np.nan)
    grid[0::2, 0::2] = p.reshape(n + 1, n + 1)
    grid[0::2, 1::2] = 0.5 * (grid[0::2, 0:-1:2] + grid[0::2, 2::2])
    grid[1::2, 0::2] = 0.5 * (grid[0:-1:2, 0::2] + grid[2::2, 0::2])
    # cell centers sit on the diagonal that splits each cell
    grid[1::2, 1::2] = 0.5 * (grid[0:-1:2, 0:-1:2] + grid[2::2, 2::2])
    return grid.reshape(-1)


def refined_triangles(disc: Discretization) -> np.ndarray:
    """Subtriangle connectivity over the quadratic dof points.

    Each mesh triangle splits into four: one corner triangle per vertex
    plus the central triangle of the three edge midpoints.
    """
    cd = disc.p2.cell_dofs
    quads = np.concatenate([
        cd[:, [0, 5, 4]], cd[:, [5, 1, 3]],
        cd[:, [4, 3, 2]], cd[:, [5, 3, 4]],
    ])
    return quads


def emit_snapshot(disc: Discretization, state, path, title="nsac fields"):
    """Write velocity, pressure and phase to a legacy VTK file."""
    coords = disc.p2.dof_coordinates
    n_points = coords.shape[0]
    ns = disc.p2.n_scalar
    ux, uy = state.u[:ns], state.u[ns:]
    pressure = _pressure_on_refined_grid(disc, state.p)
    tris = refined_triangles(disc)

    out = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {n_points} double",
    ]
    out.extend("%.17g %.17g 0" % (x, y) for x, y in coords)
    out.append(f"CELLS {len(tris)} {4 * len(tris)}")
    out.extend("3 %d %d %d" % tuple(t) for t in tris)
    out.append(f"CELL_TYPES {len(tris)}")
    out.extend("5" for _ in range(len(tris)))
    out.append(f"POINT_DATA {n_points}")
    out.append("VECTORS velocity double")
    out.extend("%.17g %.17g 0" % (a, b) for a, b in zip(ux, uy))
    out.append("SCALARS pressure double 1")
    out.append("LOOKUP_TABLE default")
    out.extend("%.17g" % v for v in pressure)
    out.append("SCALARS phi double 1")
    out.append("LOOKUP_TABLE default")
    out.extend("%.17g" % v for v in state.phi)
    with open(path, "w", newline="") as handle:
        handle.write("\n".join(out) + "\n")
