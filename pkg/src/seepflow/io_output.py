"""Field output, vertical profiles and machine-readable run reports.

File formats
------------
VTK
    Legacy 2.0 ASCII unstructured grid. Triangles (cell type 5) with cell data
    ``psi``, ``q`` (RT0 field at the centroid, ``z`` component padded with 0 in
    the third slot) and ``saturated`` (1 where ``psi > 0``).
CSV
    Header row, comma separated, ``.`` decimal point, values in ``repr``
    precision so files diff cleanly and parse back exactly.
Report
    JSON document ``{"format": "seepflow-report", "version": 1, "steps": [...]}``
    with one object per time step holding the :class:`~seepflow.seepage.StepReport`
    fields.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import numpy as np

from . import fem
from .mesh import TriMesh
from .seepage import FieldState, RichardsProblem, StepReport, boundary_head
from .scenario import OUTPUT_KINDS, OutputRequest, SimulationResult

__all__ = [
    "OutputRequest",
    "OUTPUT_KINDS",
    "REPORT_FORMAT",
    "write_vtk",
    "read_vtk_cell_data",
    "extract_profile",
    "write_profile_csv",
    "boundary_table",
    "write_boundary_csv",
    "write_report",
    "read_report",
    "read_csv",
    "OutputWriter",
]

log = logging.getLogger(__name__)

REPORT_FORMAT = "seepflow-report"
REPORT_VERSION = 1


def _num(v) -> str:
    return repr(float(v))


def _prepare(path) -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------- VTK

def write_vtk(mesh: TriMesh, state: FieldState, path, title: str | None = None) -> Path:
    """Write ``state`` on ``mesh`` as a legacy ASCII VTK file."""
    psi = np.asarray(state.psi, float)
    if psi.shape != (mesh.n_cells,):
        raise ValueError(f"psi has shape {psi.shape}, mesh has {mesh.n_cells} cells")
    q = fem.flux_at_centroids(mesh, state.q)
    title = title or f"seepflow t={state.time!r}"
    lines = ["# vtk DataFile Version 2.0", title.replace("\n", " ")[:255], "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {mesh.n_nodes} double"]
    lines += [f"{_num(x)} {_num(z)} 0.0" for x, z in mesh.nodes]
    lines.append(f"CELLS {mesh.n_cells} {4 * mesh.n_cells}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {mesh.n_cells}")
    lines += ["5"] * mesh.n_cells
    lines.append(f"CELL_DATA {mesh.n_cells}")
    lines += ["SCALARS psi double 1", "LOOKUP_TABLE default"]
    lines += [_num(v) for v in psi]
    lines.append("VECTORS q double")
    lines += [f"{_num(a)} {_num(b)} 0.0" for a, b in q]
    lines += ["SCALARS saturated int 1", "LOOKUP_TABLE default"]
    lines += ["1" if v > 0 else "0" for v in psi]
    path = _prepare(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_vtk_cell_data(path) -> dict:
    """Parse a file written by :func:`write_vtk`.

    Returns a dict with ``points`` (n, 3), ``cells`` (m, 3), ``cell_types``
    and every cell-data array by name.
    """
    tokens = Path(path).read_text().split("\n")
    out: dict = {}
    i = 4
    while i < len(tokens):
        head = tokens[i].split()
        i += 1
        if not head:
            continue
        key = head[0]
        if key == "POINTS":
            n = int(head[1])
            out["points"] = np.array([[float(v) for v in tokens[i + k].split()] for k in range(n)])
            i += n
        elif key == "CELLS":
            n = int(head[1])
            rows = [[int(v) for v in tokens[i + k].split()] for k in range(n)]
            if any(r[0] != 3 for r in rows):
                raise ValueError("only triangle cells are supported")
            out["cells"] = np.array([r[1:] for r in rows], dtype=np.int64)
            i += n
        elif key == "CELL_TYPES":
            n = int(head[1])
            out["cell_types"] = np.array([int(tokens[i + k]) for k in range(n)])
            i += n
        elif key == "CELL_DATA":
            n = int(head[1])
        elif key == "SCALARS":
            name, kind = head[1], head[2]
            conv = int if kind == "int" else float
            i += 1                                   # LOOKUP_TABLE line
            out[name] = np.array([conv(tokens[i + k]) for k in range(n)])
            i += n
        elif key == "VECTORS":
            out[head[1]] = np.array([[float(v) for v in tokens[i + k].split()] for k in range(n)])
            i += n
        else:
            raise ValueError(f"unexpected VTK section {key!r} in {path}")
    return out


# ------------------------------------------------------------------ profiles

def extract_profile(mesh: TriMesh, state: FieldState, x: float) -> np.ndarray:
    """Cells crossed by the vertical line through ``x``.

    Returns rows ``(z_centroid, psi, q_z)`` sorted by ``z``. A cell is crossed
    when ``x_min <= x < x_max`` over its vertices, so a line running along a
    mesh column boundary picks the cells on its right.
    """
    xs = mesh.nodes[mesh.triangles, 0]
    lo, hi = xs.min(axis=1), xs.max(axis=1)
    x0, x1 = mesh.nodes[:, 0].min(), mesh.nodes[:, 0].max()
    if not (x0 < x < x1):
        raise ValueError(f"profile position x={x} outside the open interval ({x0}, {x1})")
    cells = np.flatnonzero((lo <= x) & (x < hi))
    qc = fem.flux_at_centroids(mesh, state.q)
    rows = np.column_stack([mesh.centroids[cells, 1], np.asarray(state.psi)[cells], qc[cells, 1]])
    return rows[np.argsort(rows[:, 0], kind="stable")]


def _write_csv(path, header, rows) -> Path:
    path = _prepare(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, str) else (int(v) if isinstance(v, (bool, np.bool_))
                                                      else _num(v)) for v in r])
    return path


def read_csv(path) -> tuple[list, np.ndarray]:
    """Header and float array of a CSV written by this module."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return header, np.array([[float(v) for v in r] for r in body]).reshape(len(body), len(header))


def write_profile_csv(rows, path) -> Path:
    return _write_csv(path, ["z", "psi", "q_z"], np.asarray(rows))


# ------------------------------------------------------------- top boundary

def boundary_table(problem: RichardsProblem, state: FieldState) -> np.ndarray:
    """Per top edge: ``x, z, length, head, psi_trace, Q, q_n``.

    ``head`` is the head the scheme imposes (see
    :func:`~seepflow.seepage.boundary_head`), ``psi_trace`` the adjacent cell
    value.
    """
    mesh = problem.mesh
    top = mesh.top_edges
    rain = problem.rain(state.time)
    mid = mesh.edge_midpoints[top]
    return np.column_stack([mid[:, 0], mid[:, 1], mesh.edge_lengths[top],
                            boundary_head(problem, state, rain), problem.trace(state.psi),
                            fem.boundary_flux_Q(mesh, state.q, rain), np.asarray(state.q)[top]])


BOUNDARY_HEADER = ["x", "z", "length", "head", "psi_trace", "Q", "q_n"]


def write_boundary_csv(problem: RichardsProblem, state: FieldState, path) -> Path:
    tab = boundary_table(problem, state)
    return _write_csv(path, BOUNDARY_HEADER, tab[np.argsort(tab[:, 0], kind="stable")])


# ------------------------------------------------------------------- reports

def _finite_or_none(v):
    v = float(v)
    return v if np.isfinite(v) else None


def _report_dict(rep: StepReport, include_timing: bool) -> dict:
    d = {
        "time": float(rep.time),
        "iterations": int(rep.iterations),
        "converged": bool(rep.converged),
        "eta_history": [_finite_or_none(v) for v in rep.eta_history],
        "active_set_history": [int(v) for v in rep.active_set_history],
        "linearization_history": [str(v) for v in rep.linearization_history],
        "dirichlet_edges": int(rep.dirichlet_edges),
        "frozen": bool(rep.frozen),
        "last_increment": _finite_or_none(rep.last_increment),
        "relaxation": float(rep.relaxation),
    }
    if include_timing:
        d["wall_time"] = float(rep.wall_time)
    return d


def write_report(reports, path, include_timing: bool = True, meta: dict | None = None) -> Path:
    """Write step reports as JSON.

    Parameters
    ----------
    reports : sequence of StepReport
    path : path-like
    include_timing : bool
        Include per-step wall time. Without it the file is byte-identical
        across repeated runs.
    meta : dict, optional
        Extra JSON-serializable run information stored under ``"meta"``.
    """
    doc = {"format": REPORT_FORMAT, "version": REPORT_VERSION, "meta": meta or {},
           "steps": [_report_dict(r, include_timing) for r in reports]}
    path = _prepare(path)
    # non-finite numbers are stored as null
    path.write_text(json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n")
    return path


def read_report(path) -> list[StepReport]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != REPORT_FORMAT:
        raise ValueError(f"{path} is not a {REPORT_FORMAT} file")
    out = []
    for d in doc["steps"]:
        rep = StepReport(time=d["time"])
        for k, v in d.items():
            if k == "last_increment" and v is None:
                v = float("nan")
            elif k == "eta_history":
                v = [float("nan") if e is None else e for e in v]
            setattr(rep, k, v)
        out.append(rep)
    return out


# ------------------------------------------------------------------- driver

class OutputWriter:
    """Observer for :func:`~seepflow.scenario.simulate` that honours output requests.

    Call it as ``observer(step_index, state, report)``; :meth:`finish` writes
    the reports and returns the list of created files.
    """

    def __init__(self, problem: RichardsProblem, requests, out_dir, include_timing: bool = True):
        self.problem = problem
        self.requests = tuple(requests)
        self.out_dir = Path(out_dir)
        self.include_timing = include_timing
        self.reports: list = []
        self.files: list = []
        for r in self.requests:
            if r.kind == "profile_csv":
                x0, x1 = problem.mesh.nodes[:, 0].min(), problem.mesh.nodes[:, 0].max()
                if not (x0 < r.x < x1):
                    raise ValueError(f"profile x={r.x} outside the domain ({x0}, {x1})")

    def __call__(self, n: int, state: FieldState, report: StepReport):
        self.reports.append(report)
        mesh = self.problem.mesh
        for r in self.requests:
            if (n + 1) % int(r.every):
                continue
            stem = self.out_dir / f"{r.prefix}_{n + 1:04d}"
            if r.kind == "vtk_series":
                self.files.append(write_vtk(mesh, state, stem.with_suffix(".vtk")))
            elif r.kind == "profile_csv":
                rows = extract_profile(mesh, state, r.x)
                self.files.append(write_profile_csv(rows, stem.with_name(
                    f"{r.prefix}_x{r.x:g}_{n + 1:04d}.csv")))
            elif r.kind == "boundary_csv":
                self.files.append(write_boundary_csv(self.problem, state,
                                                     stem.with_suffix(".csv")))

    def initial(self, state: FieldState):
        """Write the time-zero field for ``vtk_series`` requests."""
        for r in self.requests:
            if r.kind == "vtk_series":
                self.files.append(write_vtk(self.problem.mesh, state,
                                            self.out_dir / f"{r.prefix}_0000.vtk"))

    def finish(self, meta: dict | None = None) -> list:
        for r in self.requests:
            if r.kind == "report_json":
                self.files.append(write_report(self.reports, self.out_dir / f"{r.prefix}.json",
                                               self.include_timing, meta))
        return self.files

    @classmethod
    def for_result(cls, result: SimulationResult, requests, out_dir, **kw) -> list:
        """Write outputs for an already computed run that kept its states."""
        w = cls(result.problem, requests, out_dir, **kw)
        for n, (st, rep) in enumerate(zip(result.states, result.reports)):
            w(n, st, rep)
        return w.finish()
