"""Sparse storage, block composition and the direct linear solve.

Matrices are :class:`scipy.sparse.csr_matrix` instances kept in canonical form
(sorted column indices, no duplicates, no stored zeros).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

__all__ = [
    "SingularMatrixError",
    "from_triplets",
    "BlockSystem",
    "assemble_blocks",
    "solve",
    "residual_ok",
]

log = logging.getLogger(__name__)

# equilibrate when max/min row norm exceeds this ratio
EQUILIBRATION_RATIO = 1e8


class SingularMatrixError(ArithmeticError):
    """The factorization hit a zero pivot.

    ``pivot`` is the index of a structurally empty row or column when one can
    be identified, otherwise ``None``.
    """

    def __init__(self, msg, pivot=None):
        super().__init__(msg if pivot is None else f"{msg} (pivot {pivot})")
        self.pivot = pivot


def canonical(mat) -> sps.csr_matrix:
    out = sps.csr_matrix(mat)
    out.sum_duplicates()
    out.eliminate_zeros()
    out.sort_indices()
    return out


def from_triplets(rows, cols, values, shape) -> sps.csr_matrix:
    """Compressed-row matrix from coordinate triplets; duplicates are summed."""
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    values = np.asarray(values, dtype=float).ravel()
    if not (rows.size == cols.size == values.size):
        raise ValueError("rows, cols and values must have equal length")
    n, m = shape
    if rows.size and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= m):
        raise IndexError(f"triplet index out of range for shape {shape}")
    return canonical(sps.coo_matrix((values, (rows, cols)), shape=(n, m)))


@dataclass
class BlockSystem:
    """Block matrix with right-hand-side segments.

    ``blocks[i][j]`` is a sparse matrix or ``None`` (a zero block). The row
    sizes come from ``rhs`` and must match the block shapes.
    """

    blocks: list
    rhs: list = field(default_factory=list)

    @property
    def sizes(self):
        return [len(r) for r in self.rhs]


def assemble_blocks(system: BlockSystem):
    """Return the global ``(matrix, rhs)`` of a :class:`BlockSystem`."""
    sizes = system.sizes
    nb = len(sizes)
    if len(system.blocks) != nb or any(len(row) != nb for row in system.blocks):
        raise ValueError(f"block grid must be {nb}x{nb}")
    grid = []
    for i, row in enumerate(system.blocks):
        out_row = []
        for j, blk in enumerate(row):
            if blk is None:
                out_row.append(sps.csr_matrix((sizes[i], sizes[j])))
                continue
            if blk.shape != (sizes[i], sizes[j]):
                raise ValueError(f"block ({i},{j}) has shape {blk.shape}, "
                                 f"expected {(sizes[i], sizes[j])}")
            out_row.append(blk)
        grid.append(out_row)
    mat = canonical(sps.bmat(grid, format="csr"))
    rhs = np.concatenate([np.asarray(r, dtype=float) for r in system.rhs]) if nb else np.zeros(0)
    return mat, rhs


def _row_norms(mat):
    return np.sqrt(np.asarray(mat.multiply(mat).sum(axis=1)).ravel())


def residual_ok(mat, x, b, rtol=1e-10) -> bool:
    r = np.linalg.norm(mat @ x - b)
    return r <= rtol * (spla.norm(mat) * np.linalg.norm(x) + np.linalg.norm(b))


def solve(mat, b) -> np.ndarray:
    """Solve ``mat @ x = b`` by sparse LU with partial pivoting.

    Rows and columns are equilibrated first when the row norms span more than
    eight orders of magnitude. One step of iterative refinement is applied if
    the residual exceeds ``1e-10 (|A|_F |x| + |b|)``.
    """
    mat = sps.csr_matrix(mat)
    b = np.asarray(b, dtype=float)
    n, m = mat.shape
    if n != m:
        raise ValueError(f"matrix must be square, got {mat.shape}")
    if n == 0:
        return np.zeros(0)
    rn = _row_norms(mat)
    cn = np.sqrt(np.asarray(mat.multiply(mat).sum(axis=0)).ravel())
    for kind, norms in (("row", rn), ("column", cn)):
        empty = np.flatnonzero(norms == 0)
        if empty.size:
            raise SingularMatrixError(f"structurally singular: empty {kind}", int(empty[0]))
    dr = dc = None
    if rn.max() / rn.min() > EQUILIBRATION_RATIO:
        dr = 1.0 / rn
        scaled = sps.diags(dr) @ mat
        cn = np.sqrt(np.asarray(scaled.multiply(scaled).sum(axis=0)).ravel())
        dc = 1.0 / cn
        work = (scaled @ sps.diags(dc)).tocsc()
        rhs = dr * b
    else:
        work = mat.tocsc()
        rhs = b
    try:
        lu = spla.splu(work)
    except RuntimeError as exc:
        raise SingularMatrixError(f"singular matrix: {exc}") from None
    y = lu.solve(rhs)
    x = y * dc if dc is not None else y
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("non-finite solution")
    if not residual_ok(mat, x, b):
        r = b - mat @ x
        dy = lu.solve(dr * r if dr is not None else r)
        x = x + (dy * dc if dc is not None else dy)
        if not residual_ok(mat, x, b):
            log.warning("linear solve residual above tolerance after refinement")
    return x
