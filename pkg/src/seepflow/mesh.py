"""Conforming triangulations of vertical soil sections.

Edges carry a global orientation: the unit normal points from the lower to the
higher adjacent triangle index, and outward on the boundary. Edge node order is
chosen so that the normal is the clockwise rotation of the edge tangent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "INTERIOR", "TOP", "BOTTOM", "LATERAL",
    "MeshError", "GeometryError", "MeshParseError",
    "TriMesh", "BoundaryClassifier",
    "build_rectangle_mesh", "build_profile_mesh",
    "import_mesh", "export_mesh", "edge_geometry",
]

INTERIOR, TOP, BOTTOM, LATERAL = 0, 1, 2, 3
TAG_NAMES = {INTERIOR: "interior", TOP: "top", BOTTOM: "bottom", LATERAL: "lateral"}


class MeshError(ValueError):
    pass


class GeometryError(MeshError):
    pass


class MeshParseError(MeshError):
    def __init__(self, lineno, msg):
        super().__init__(f"line {lineno}: {msg}" if lineno else msg)
        self.lineno = lineno


class TriMesh:
    """Triangulation with oriented edges and tagged boundary.

    Parameters
    ----------
    nodes : (n_nodes, 2) array
        ``(x, z)`` coordinates in meters.
    triangles : (n_cells, 3) int array
        Node indices; reordered counter-clockwise if needed.
    boundary_tags : callable or dict, optional
        Either a :class:`BoundaryClassifier`-like callable mapping
        ``(midpoint, normal) -> tag`` or a mapping from the sorted node pair of
        each boundary edge to its tag.
    edges : (n_edges, 2) int array, optional
        Explicit edge list. Its order is preserved; node order is re-oriented.

    Attributes
    ----------
    edges : (n_edges, 2) int array
    edge_cells : (n_edges, 2) int array
        Adjacent cells, lower index first; ``-1`` marks a missing neighbour.
    cell_edges : (n_cells, 3) int array
        Local edge ``i`` is opposite local vertex ``i``.
    cell_signs : (n_cells, 3) array of +-1
        +1 where the global edge normal is outward for the cell.
    tags : (n_edges,) int array
    """

    def __init__(self, nodes, triangles, boundary_tags=None, edges=None):
        self.nodes = np.ascontiguousarray(nodes, dtype=float).reshape(-1, 2)
        tri = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        if tri.size and (tri.min() < 0 or tri.max() >= len(self.nodes)):
            raise MeshError("triangle references a missing node")
        p = self.nodes[tri]
        signed = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
        if np.any(signed == 0.0):
            raise MeshError(f"degenerate triangle {int(np.flatnonzero(signed == 0)[0])}")
        cw = signed < 0
        tri[cw] = tri[cw][:, [0, 2, 1]]
        self.triangles = tri
        self.areas = np.abs(signed)
        self.centroids = p.mean(axis=1)
        self._build_edges(edges)
        self._geometry()
        self.tags = np.zeros(self.n_edges, dtype=np.int64)
        self._assign_tags(boundary_tags)

    # ------------------------------------------------------------------ build
    def _build_edges(self, edges):
        tri = self.triangles
        nc = len(tri)
        # local edge i opposite vertex i, traversed counter-clockwise
        loc = np.stack([tri[:, [1, 2]], tri[:, [2, 0]], tri[:, [0, 1]]], axis=1)
        keys = np.sort(loc, axis=2).reshape(-1, 2)
        if edges is None:
            uniq, inv, counts = np.unique(keys, axis=0, return_inverse=True,
                                          return_counts=True)
            edge_keys = uniq
        else:
            edge_keys = np.sort(np.asarray(edges, dtype=np.int64).reshape(-1, 2), axis=1)
            lookup = {tuple(k): i for i, k in enumerate(map(tuple, edge_keys))}
            if len(lookup) != len(edge_keys):
                raise MeshError("duplicate edge in edge list")
            try:
                inv = np.array([lookup[tuple(k)] for k in keys], dtype=np.int64)
            except KeyError as exc:
                raise MeshError(f"triangle edge {exc.args[0]} missing from edge list") from None
            counts = np.bincount(inv, minlength=len(edge_keys))
        inv = inv.reshape(-1)
        if np.any(counts > 2):
            raise MeshError("non-manifold edge")
        if np.any(counts == 0):
            raise MeshError("edge not used by any triangle")
        ne = len(edge_keys)
        cell_of = np.repeat(np.arange(nc), 3)
        order = np.lexsort((cell_of, inv))
        starts = np.searchsorted(inv[order], np.arange(ne))
        first = order[starts]
        has_second = counts == 2
        second = np.full(ne, -1, dtype=np.int64)
        second[has_second] = order[starts[has_second] + 1]
        edge_cells = np.stack([cell_of[first],
                               np.where(has_second, cell_of[np.maximum(second, 0)], -1)], axis=1)
        # orient along the lower-index cell's counter-clockwise traversal
        self.edges = loc.reshape(-1, 2)[first].copy()
        self.edge_cells = edge_cells
        self.cell_edges = inv.reshape(nc, 3)
        owner = edge_cells[self.cell_edges, 0]
        self.cell_signs = np.where(owner == np.arange(nc)[:, None], 1.0, -1.0)

    def _geometry(self):
        p0 = self.nodes[self.edges[:, 0]]
        p1 = self.nodes[self.edges[:, 1]]
        t = p1 - p0
        self.edge_lengths = np.hypot(t[:, 0], t[:, 1])
        self.edge_normals = np.stack([t[:, 1], -t[:, 0]], axis=1) / self.edge_lengths[:, None]
        self.edge_midpoints = 0.5 * (p0 + p1)

    def _assign_tags(self, boundary_tags):
        bnd = self.boundary_edges
        if boundary_tags is None:
            self.tags[bnd] = LATERAL
            return
        if callable(boundary_tags):
            for e in bnd:
                self.tags[e] = boundary_tags(self.edge_midpoints[e], self.edge_normals[e])
        else:
            for e in bnd:
                key = tuple(sorted(int(v) for v in self.edges[e]))
                if key not in boundary_tags:
                    raise MeshError(f"boundary edge {key} has no tag")
                self.tags[e] = boundary_tags[key]
        bad = bnd[(self.tags[bnd] < TOP) | (self.tags[bnd] > LATERAL)]
        if bad.size:
            raise MeshError(f"boundary edge {int(bad[0])} has an invalid tag")

    # ------------------------------------------------------------- properties
    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_cells(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_cells[:, 1] < 0)

    def edges_with_tag(self, tag: int) -> np.ndarray:
        return np.flatnonzero(self.tags == tag)

    @property
    def top_edges(self) -> np.ndarray:
        return self.edges_with_tag(TOP)

    @property
    def h_max(self) -> float:
        return float(self.edge_lengths.max())

    def validate(self):
        """Check the structural invariants, raising :class:`MeshError`."""
        n_adj = (self.edge_cells >= 0).sum(axis=1)
        if np.any(n_adj < 1):
            raise MeshError("edge without adjacent cell")
        bnd = n_adj == 1
        if np.any(self.tags[bnd] == INTERIOR) or np.any(self.tags[~bnd] != INTERIOR):
            raise MeshError("boundary tags do not partition the boundary")
        if np.any(self.areas <= 0):
            raise MeshError("non-positive triangle area")
        closure = np.einsum("ce,ce,ced->cd", self.cell_signs,
                            self.edge_lengths[self.cell_edges],
                            self.edge_normals[self.cell_edges])
        if np.abs(closure).max() > 1e-12 * max(1.0, self.h_max):
            raise MeshError("cell normals do not close")
        # outward boundary normals
        e = self.boundary_edges
        d = self.centroids[self.edge_cells[e, 0]] - self.edge_midpoints[e]
        if np.any(np.einsum("ed,ed->e", d, self.edge_normals[e]) >= 0):
            raise MeshError("boundary normal not outward")

    def copy_with_tags(self, tags: np.ndarray) -> "TriMesh":
        new = object.__new__(TriMesh)
        new.__dict__.update(self.__dict__)
        new.tags = np.asarray(tags, dtype=np.int64).copy()
        return new

    def __repr__(self):
        return (f"TriMesh(nodes={self.n_nodes}, edges={self.n_edges}, "
                f"cells={self.n_cells}, top_edges={self.top_edges.size})")


@dataclass(frozen=True)
class BoundaryClassifier:
    """Tag boundary edges by geometric predicates on midpoint and normal.

    Exactly one predicate must hold for every boundary edge.
    """

    top: Callable
    bottom: Callable
    lateral: Callable

    def __call__(self, midpoint, normal) -> int:
        hits = [tag for tag, pred in ((TOP, self.top), (BOTTOM, self.bottom),
                                      (LATERAL, self.lateral)) if pred(midpoint, normal)]
        if len(hits) != 1:
            raise MeshError(f"boundary edge at {tuple(midpoint)} matches {len(hits)} tags")
        return hits[0]


def _grid_triangles(nx: int, nz: int) -> np.ndarray:
    """Split each cell of an (nx, nz) node-lattice into two triangles."""
    i, j = np.meshgrid(np.arange(nx), np.arange(nz), indexing="xy")
    n00 = (j * (nx + 1) + i).ravel()
    n10, n01 = n00 + 1, n00 + nx + 1
    n11 = n01 + 1
    lower = np.stack([n00, n10, n11], axis=1)
    upper = np.stack([n00, n11, n01], axis=1)
    return np.stack([lower, upper], axis=1).reshape(-1, 3)


def build_rectangle_mesh(width: float, height: float, h: float) -> TriMesh:
    """Structured triangulation of ``(0, width) x (0, height)``.

    Cells have spacing at most ``h`` in each direction, so edges are at most
    ``sqrt(2) h`` long.
    """
    if not (width > 0 and height > 0 and h > 0):
        raise GeometryError("width, height and h must be positive")
    if h > min(width, height) * (1 + 1e-12):
        raise GeometryError("h must not exceed the smaller side")
    nx = max(1, math.ceil(width / h - 1e-9))
    nz = max(1, math.ceil(height / h - 1e-9))
    x = np.linspace(0.0, width, nx + 1)
    z = np.linspace(0.0, height, nz + 1)
    X, Z = np.meshgrid(x, z, indexing="xy")
    nodes = np.stack([X.ravel(), Z.ravel()], axis=1)
    tol = 1e-9 * max(width, height)
    classifier = BoundaryClassifier(
        top=lambda m, n: abs(m[1] - height) < tol,
        bottom=lambda m, n: abs(m[1]) < tol,
        lateral=lambda m, n: abs(m[1] - height) >= tol and abs(m[1]) >= tol,
    )
    return TriMesh(nodes, _grid_triangles(nx, nz), classifier)


def _as_polyline(pts, name):
    arr = np.asarray(pts, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 2:
        raise GeometryError(f"{name} must be a list of at least two (x, z) points")
    if np.any(np.diff(arr[:, 0]) <= 0):
        raise GeometryError(f"{name} must be strictly increasing in x")
    return arr


def build_profile_mesh(top_profile, bottom_profile, h_top: float, h_bot: float) -> TriMesh:
    """Mapped structured mesh of the region between two polylines.

    Vertical fibres stand at x-stations whose spacing along the top surface is
    at most ``min(h_top, h_bot)``; every fibre is split into the same number of
    layers, graded linearly from ``h_top`` at the surface to ``h_bot`` at the
    base.
    """
    top = _as_polyline(top_profile, "top profile")
    bot = _as_polyline(bottom_profile, "bottom profile")
    if not (h_top > 0 and h_bot > 0):
        raise GeometryError("mesh sizes must be positive")
    x0, x1 = top[0, 0], top[-1, 0]
    if not (np.isclose(bot[0, 0], x0) and np.isclose(bot[-1, 0], x1)):
        raise GeometryError("profiles must span the same x interval")
    breaks = np.union1d(top[:, 0], bot[:, 0])
    if np.any(np.interp(breaks, top[:, 0], top[:, 1]) <= np.interp(breaks, bot[:, 0], bot[:, 1])):
        raise GeometryError("profiles intersect")
    h_along = min(h_top, h_bot)
    stations = [breaks[:1]]
    for a, b in zip(breaks[:-1], breaks[1:]):
        za, zb = np.interp([a, b], top[:, 0], top[:, 1])
        n = max(1, math.ceil(math.hypot(b - a, zb - za) / h_along - 1e-9))
        stations.append(np.linspace(a, b, n + 1)[1:])
    xs = np.concatenate(stations)
    zt = np.interp(xs, top[:, 0], top[:, 1])
    zb = np.interp(xs, bot[:, 0], bot[:, 1])
    thick = zt - zb
    nl = max(1, math.ceil(2.0 * thick.max() / (h_top + h_bot) - 1e-9))
    sizes = np.linspace(h_bot, h_top, nl) if nl > 1 else np.array([1.0])
    frac = np.concatenate([[0.0], np.cumsum(sizes)]) / sizes.sum()
    X = np.broadcast_to(xs, (nl + 1, xs.size))
    Z = zb[None, :] + frac[:, None] * thick[None, :]
    nodes = np.stack([X.ravel(), Z.ravel()], axis=1)
    nx = xs.size - 1
    span = max(x1 - x0, float(thick.max()))
    tol = 1e-9 * span
    classifier = BoundaryClassifier(
        top=lambda m, n: abs(m[0] - x0) >= tol and abs(m[0] - x1) >= tol and n[1] > 0,
        bottom=lambda m, n: abs(m[0] - x0) >= tol and abs(m[0] - x1) >= tol and n[1] < 0,
        lateral=lambda m, n: abs(m[0] - x0) < tol or abs(m[0] - x1) < tol,
    )
    return TriMesh(nodes, _grid_triangles(nx, nl), classifier)


def edge_geometry(mesh: TriMesh, edge_index: int):
    """Return ``(length, unit_normal, midpoint)`` of one edge."""
    return (float(mesh.edge_lengths[edge_index]), mesh.edge_normals[edge_index].copy(),
            mesh.edge_midpoints[edge_index].copy())


# ------------------------------------------------------------------ ASCII I/O

def export_mesh(mesh: TriMesh) -> str:
    """Serialize to the ASCII mesh format read by :func:`import_mesh`."""
    out = ["# seepflow mesh: nnodes nedges ntris; nodes; edges (n0 n1 tag); triangles",
           f"{mesh.n_nodes} {mesh.n_edges} {mesh.n_cells}"]
    out += [f"{x!r} {z!r}" for x, z in mesh.nodes.tolist()]
    out += [f"{a} {b} {t}" for (a, b), t in zip(mesh.edges.tolist(), mesh.tags.tolist())]
    out += [f"{a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    return "\n".join(out) + "\n"


def import_mesh(text: str) -> TriMesh:
    """Parse the ASCII mesh format and validate all invariants.

    Format: ``nnodes nedges ntris``, then node lines ``x z``, edge lines
    ``n0 n1 tag`` (0 interior, 1 top, 2 bottom, 3 lateral) and triangle lines
    ``n0 n1 n2``. ``#`` starts a comment.
    """
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].split()
        if body:
            lines.append((lineno, body))
    if not lines:
        raise MeshParseError(None, "empty mesh file")
    lineno, head = lines[0]
    try:
        nn, ne, nt = (int(v) for v in head)
    except ValueError:
        raise MeshParseError(lineno, "header must be 'nnodes nedges ntris'") from None
    if min(nn, ne, nt) < 0:
        raise MeshParseError(lineno, "negative count")
    if len(lines) - 1 != nn + ne + nt:
        raise MeshParseError(lines[-1][0], f"expected {nn + ne + nt} data lines, found {len(lines) - 1}")

    def parse(chunk, n_fields, conv, what):
        rows = []
        for lineno, body in chunk:
            if len(body) != n_fields:
                raise MeshParseError(lineno, f"{what} line needs {n_fields} fields")
            try:
                rows.append([conv(v) for v in body])
            except ValueError:
                raise MeshParseError(lineno, f"malformed {what} line") from None
        return rows

    node_lines = lines[1:1 + nn]
    edge_lines = lines[1 + nn:1 + nn + ne]
    tri_lines = lines[1 + nn + ne:]
    nodes = parse(node_lines, 2, float, "node")
    edges = parse(edge_lines, 3, int, "edge")
    tris = parse(tri_lines, 3, int, "triangle")
    for (lineno, _), row in zip(edge_lines, edges):
        if not all(0 <= v < nn for v in row[:2]):
            raise MeshParseError(lineno, "edge references a missing node")
        if row[2] not in TAG_NAMES:
            raise MeshParseError(lineno, f"unknown edge tag {row[2]}")
    for (lineno, _), row in zip(tri_lines, tris):
        if not all(0 <= v < nn for v in row):
            raise MeshParseError(lineno, "triangle references a missing node")
    edge_line = {}
    for (lineno, _), row in zip(edge_lines, edges):
        key = tuple(sorted(row[:2]))
        if key in edge_line:
            raise MeshParseError(lineno, "duplicate edge")
        edge_line[key] = lineno
    usage = dict.fromkeys(edge_line, 0)
    for (lineno, _), row in zip(tri_lines, tris):
        for a, b in ((row[0], row[1]), (row[1], row[2]), (row[2], row[0])):
            key = (min(a, b), max(a, b))
            if key not in usage:
                raise MeshParseError(lineno, f"triangle edge {key} missing from edge list")
            usage[key] += 1
            if usage[key] > 2:
                raise MeshParseError(edge_line[key], "non-manifold edge")
    for key, n in usage.items():
        if n == 0:
            raise MeshParseError(edge_line[key], "edge not used by any triangle")
    tags = {key: row[2] for key, row in zip((tuple(sorted(r[:2])) for r in edges), edges)}
    try:
        mesh = TriMesh(np.array(nodes, dtype=float).reshape(-1, 2),
                       np.array(tris, dtype=np.int64).reshape(-1, 3),
                       boundary_tags={k: v for k, v in tags.items() if v != INTERIOR},
                       edges=np.array([r[:2] for r in edges], dtype=np.int64).reshape(-1, 2))
        mesh.tags = np.array([r[2] for r in edges], dtype=np.int64)
        mesh.validate()
    except MeshError as exc:
        raise MeshParseError(None, str(exc)) from None
    return mesh
