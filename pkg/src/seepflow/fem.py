"""Lowest-order Raviart-Thomas / piecewise-constant assembly.

Flux degrees of freedom are the constant normal-trace values ``q . n_e`` on
each edge (global normal orientation, units m/s). On a triangle ``T`` the basis
function of its local edge ``i`` (opposite vertex ``p_i``) is

    phi_i(x) = sigma_i |e_i| / (2 |T|) (x - p_i)

so ``phi_i . n_e = 1`` on edge ``e_i`` and ``div phi_i = sigma_i |e_i| / |T|``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps

from .constitutive import MaterialParams, d_inv_permeability
from .mesh import TriMesh

__all__ = [
    "AssemblyError",
    "DofLayout",
    "basis_scale",
    "local_mass",
    "assemble_A",
    "assemble_B",
    "assemble_E",
    "assemble_D",
    "assemble_C",
    "assemble_NL",
    "assemble_BL",
    "newton_coupling",
    "boundary_flux_Q",
    "flux_at_centroids",
    "flux_at_points",
]


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True)
class DofLayout:
    """Contiguous numbering of flux, head and (optional) trace unknowns."""

    n_flux: int
    n_head: int
    top_edges: np.ndarray
    hybrid: bool = False

    @classmethod
    def for_mesh(cls, mesh: TriMesh, hybrid: bool = False) -> "DofLayout":
        return cls(mesh.n_edges, mesh.n_cells, mesh.top_edges.copy(), hybrid)

    @property
    def n_trace(self) -> int:
        return int(self.top_edges.size) if self.hybrid else 0

    @property
    def size(self) -> int:
        return self.n_flux + self.n_head + self.n_trace

    @property
    def flux(self) -> slice:
        return slice(0, self.n_flux)

    @property
    def head(self) -> slice:
        return slice(self.n_flux, self.n_flux + self.n_head)

    @property
    def trace(self) -> slice:
        return slice(self.n_flux + self.n_head, self.size)


def _cached(mesh, key, build):
    store = mesh.__dict__.setdefault("_fem_cache", {})
    if key not in store:
        store[key] = build()
    return store[key]


def basis_scale(mesh: TriMesh) -> np.ndarray:
    """Per cell and local edge, ``sigma |e| / (2 |T|)``."""
    return _cached(mesh, "scale", lambda: mesh.cell_signs * mesh.edge_lengths[mesh.cell_edges]
                   / (2.0 * mesh.areas[:, None]))


def local_mass(mesh: TriMesh) -> np.ndarray:
    """Unweighted local RT0 mass matrices, shape ``(n_cells, 3, 3)``.

    The edge-midpoint rule is exact for the quadratic integrand.
    """
    def build():
        p = mesh.nodes[mesh.triangles]                       # (T, 3 vertices, 2)
        mids = 0.5 * (p[:, [1, 2, 0]] + p[:, [2, 0, 1]])      # (T, 3 points, 2)
        d = mids[:, :, None, :] - p[:, None, :, :]           # (T, point, basis, 2)
        s = basis_scale(mesh)
        integ = np.einsum("tkid,tkjd->tij", d, d) * (mesh.areas / 3.0)[:, None, None]
        return integ * s[:, :, None] * s[:, None, :]
    return _cached(mesh, "mass", build)


class _Pattern:
    """Fixed sparsity pattern; maps per-entry values to CSR data by summation."""

    def __init__(self, rows, cols, shape):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        keys = rows * shape[1] + cols
        uniq, self.inv = np.unique(keys, return_inverse=True)
        self.inv = self.inv.ravel()
        self.indices = (uniq % shape[1]).astype(np.int32)
        r = uniq // shape[1]
        self.indptr = np.searchsorted(r, np.arange(shape[0] + 1)).astype(np.int32)
        self.shape = shape
        self.nnz = uniq.size

    def matrix(self, values) -> sps.csr_matrix:
        data = np.bincount(self.inv, weights=np.asarray(values, float).ravel(), minlength=self.nnz)
        out = sps.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=self.shape)
        out.eliminate_zeros()
        return out


def _mass_pattern(mesh):
    ce = mesh.cell_edges
    return _cached(mesh, "mass_pattern", lambda: _Pattern(
        np.broadcast_to(ce[:, :, None], (mesh.n_cells, 3, 3)),
        np.broadcast_to(ce[:, None, :], (mesh.n_cells, 3, 3)),
        (mesh.n_edges, mesh.n_edges)))


def assemble_A(mesh: TriMesh, inv_k_per_cell) -> sps.csr_matrix:
    """Weighted flux mass matrix ``(K^-1 phi_j, phi_i)``."""
    inv_k = np.broadcast_to(np.asarray(inv_k_per_cell, dtype=float), (mesh.n_cells,))
    if np.any(~(inv_k > 0)):
        raise AssemblyError("inverse permeability must be positive on every cell")
    return _mass_pattern(mesh).matrix(local_mass(mesh) * inv_k[:, None, None])


def assemble_B(mesh: TriMesh) -> sps.csr_matrix:
    """Divergence block ``-(phi_T, div phi_e)``: entry ``-sigma |e|``."""
    def build():
        vals = -mesh.cell_signs * mesh.edge_lengths[mesh.cell_edges]
        rows = np.repeat(np.arange(mesh.n_cells), 3)
        return sps.csr_matrix((vals.ravel(), (rows, mesh.cell_edges.ravel())),
                              shape=(mesh.n_cells, mesh.n_edges))
    return _cached(mesh, "B", build)


def assemble_E(mesh: TriMesh) -> sps.csr_matrix:
    """Trace coupling ``(phi^l_i, phi_j . n)`` on the top boundary."""
    def build():
        top = mesh.top_edges
        if top.size == 0:
            raise AssemblyError("mesh has no top edges")
        return sps.csr_matrix((mesh.edge_lengths[top], (np.arange(top.size), top)),
                              shape=(top.size, mesh.n_edges))
    return _cached(mesh, "E", build)


def assemble_D(mesh: TriMesh) -> np.ndarray:
    """Gravity load ``-(e_z, phi_i)``, exact by the centroid rule."""
    def build():
        p = mesh.nodes[mesh.triangles]
        dz = mesh.centroids[:, None, 1] - p[:, :, 1]
        vals = -basis_scale(mesh) * dz * mesh.areas[:, None]
        return np.bincount(mesh.cell_edges.ravel(), weights=vals.ravel(),
                           minlength=mesh.n_edges)
    return _cached(mesh, "D", build).copy()


def assemble_C(mesh: TriMesh, theta_old, theta_k, dt: float) -> np.ndarray:
    if not dt > 0:
        raise AssemblyError("dt must be positive")
    return mesh.areas * (np.asarray(theta_old) - np.asarray(theta_k)) / dt


def assemble_NL(mesh: TriMesh, l_per_cell, dt: float) -> sps.dia_matrix:
    """Diagonal ``|T| l_T / dt`` (P0 mass matrix scaled by the linearization)."""
    if not dt > 0:
        raise AssemblyError("dt must be positive")
    lv = np.broadcast_to(np.asarray(l_per_cell, dtype=float), (mesh.n_cells,))
    if np.any(lv < 0):
        raise AssemblyError("linearization coefficient must be non-negative")
    return sps.diags(mesh.areas * lv / dt, format="csr")


def newton_coupling(mesh: TriMesh, psi_k, q_k, material: MaterialParams) -> sps.csr_matrix:
    """Jacobian of ``A(psi) q`` in ``psi`` at ``(psi_k, q_k)``, shape ``(n_flux, n_head)``."""
    dinv = np.asarray(d_inv_permeability(np.asarray(psi_k, float), material))
    qloc = np.asarray(q_k, float)[mesh.cell_edges]                   # (T, 3)
    vals = np.einsum("tij,tj->ti", local_mass(mesh), qloc) * dinv[:, None]
    cols = np.repeat(np.arange(mesh.n_cells), 3)
    out = sps.csr_matrix((vals.ravel(), (mesh.cell_edges.ravel(), cols)),
                         shape=(mesh.n_edges, mesh.n_cells))
    out.eliminate_zeros()
    return out


def assemble_BL(mode: str, mesh: TriMesh, psi_k=None, q_k=None,
                material: MaterialParams | None = None) -> sps.csr_matrix:
    """Head-to-flux coupling block of the linearized system.

    ``lscheme`` returns ``B^T``; ``newton`` adds :func:`newton_coupling`
    evaluated at the current iterate.
    """
    bt = assemble_B(mesh).T.tocsr()
    if mode == "lscheme":
        return bt
    if mode == "newton":
        if psi_k is None or q_k is None or material is None:
            raise AssemblyError("newton mode needs psi_k, q_k and material")
        return (bt + newton_coupling(mesh, psi_k, q_k, material)).tocsr()
    raise AssemblyError(f"unknown linearization {mode!r}")


def boundary_flux_Q(mesh: TriMesh, q, rain) -> np.ndarray:
    """Flux disparity ``Q = (p - q) . n`` per top edge.

    ``rain`` holds the outward normal component ``p . n`` on each top edge.
    """
    top = mesh.top_edges
    rain = np.broadcast_to(np.asarray(rain, dtype=float), top.shape)
    return rain - np.asarray(q, dtype=float)[top]


def flux_at_points(mesh: TriMesh, q, cells, points) -> np.ndarray:
    """Evaluate the RT0 field of ``q`` at ``points`` lying in ``cells``."""
    cells = np.asarray(cells)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    verts = mesh.nodes[mesh.triangles[cells]]                # (n, 3, 2)
    coef = basis_scale(mesh)[cells] * np.asarray(q, float)[mesh.cell_edges[cells]]
    return np.einsum("ni,nid->nd", coef, pts[:, None, :] - verts)


def flux_at_centroids(mesh: TriMesh, q) -> np.ndarray:
    """Cell-centroid values of the RT0 field, shape ``(n_cells, 2)``."""
    return flux_at_points(mesh, q, np.arange(mesh.n_cells), mesh.centroids)
