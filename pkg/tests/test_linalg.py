import numpy as np
import pytest
import scipy.sparse as sps

from seepflow import fem
from seepflow.linalg import (BlockSystem, SingularMatrixError, assemble_blocks, from_triplets,
                             residual_ok, solve)
from seepflow.mesh import build_rectangle_mesh


def test_from_triplets_sums_duplicates():
    m = from_triplets([0, 0], [0, 0], [1.0, 2.0], (2, 2))
    assert m.nnz == 1 and m[0, 0] == 3.0


def test_from_triplets_empty_and_range():
    m = from_triplets([], [], [], (3, 4))
    assert m.shape == (3, 4) and m.nnz == 0
    with pytest.raises(IndexError):
        from_triplets([3], [0], [1.0], (3, 3))
    with pytest.raises(IndexError):
        from_triplets([0], [-1], [1.0], (3, 3))


def test_from_triplets_canonical_and_cancellation():
    m = from_triplets([1, 1, 0, 1], [2, 0, 1, 2], [1.0, 5.0, 2.0, -1.0], (2, 3))
    # (1, 2) cancels to zero and is dropped
    assert m.nnz == 2
    for r in range(m.shape[0]):
        cols = m.indices[m.indptr[r]:m.indptr[r + 1]]
        assert np.all(np.diff(cols) > 0)
    assert np.all(np.diff(m.indptr) >= 0)


def test_dense_round_trip():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n, k = rng.integers(1, 21, size=2)
        dense = rng.standard_normal((n, k)) * (rng.random((n, k)) < 0.3)
        r, c = np.nonzero(dense)
        m = from_triplets(r, c, dense[r, c], (n, k))
        np.testing.assert_array_equal(m.toarray(), dense)


def test_blocks_identity():
    eye = sps.identity(3, format="csr")
    mat, rhs = assemble_blocks(BlockSystem([[eye, None], [None, eye]],
                                           [np.ones(3), 2 * np.ones(3)]))
    np.testing.assert_array_equal(mat.toarray(), np.eye(6))
    np.testing.assert_array_equal(rhs, [1, 1, 1, 2, 2, 2])


def test_blocks_shape_mismatch():
    eye = sps.identity(3, format="csr")
    with pytest.raises(ValueError):
        assemble_blocks(BlockSystem([[eye, None], [None, sps.identity(2)]],
                                    [np.ones(3), np.ones(3)]))
    with pytest.raises(ValueError):
        assemble_blocks(BlockSystem([[eye]], [np.ones(3), np.ones(3)]))


def test_blocks_hybrid_layout_inactive_rows():
    # all H blocks zero: the third block row is [E 0 0]
    mesh = build_rectangle_mesh(1.0, 1.5, 0.5 + 1e-13)
    A = fem.assemble_A(mesh, 1.0)
    B = fem.assemble_B(mesh)
    E = fem.assemble_E(mesh)
    nt = E.shape[0]
    p = np.full(nt, -1e-6)
    blocks = [[A, B.T, E.T], [B, None, None], [E, None, None]]
    q_rain = np.zeros(mesh.n_edges)
    q_rain[mesh.top_edges] = p
    rhs = [np.zeros(mesh.n_edges), np.zeros(mesh.n_cells), E @ q_rain]
    mat, vec = assemble_blocks(BlockSystem(blocks, rhs))
    dense = mat.toarray()
    nf, nh = mesh.n_edges, mesh.n_cells
    hand = np.zeros_like(dense)
    hand[:nf, :nf] = A.toarray()
    hand[:nf, nf:nf + nh] = B.T.toarray()
    hand[:nf, nf + nh:] = E.T.toarray()
    hand[nf:nf + nh, :nf] = B.toarray()
    hand[nf + nh:, :nf] = E.toarray()
    np.testing.assert_array_equal(dense, hand)
    np.testing.assert_array_equal(dense[nf + nh:, nf:], 0)
    np.testing.assert_allclose(vec[nf + nh:], p * mesh.edge_lengths[mesh.top_edges])


def test_solve_small():
    np.testing.assert_array_equal(solve(sps.identity(4), np.arange(4.0)), np.arange(4.0))
    np.testing.assert_allclose(solve(sps.csr_matrix([[2.0, 0], [0, 4.0]]), [2.0, 8.0]), [1, 2])


def test_solve_spd_against_dense():
    rng = np.random.default_rng(1)
    M = rng.standard_normal((50, 50))
    A = M @ M.T + 50 * np.eye(50)
    b = rng.standard_normal(50)
    x = solve(sps.csr_matrix(A), b)
    ref = np.linalg.solve(A, b)
    assert np.linalg.norm(x - ref) / np.linalg.norm(ref) <= 1e-10
    assert residual_ok(sps.csr_matrix(A), x, b)


def test_solve_badly_scaled_saddle_point():
    # penalty rows with weights spanning 20 orders of magnitude
    mesh = build_rectangle_mesh(0.1, 1.0, 0.05)
    A = fem.assemble_A(mesh, 1e6).tolil()
    for e in mesh.top_edges:
        A[e, e] += mesh.edge_lengths[e] / (1e-10 * mesh.edge_lengths[e])
    B = fem.assemble_B(mesh)
    K = sps.bmat([[A.tocsr(), B.T], [B, None]], format="csr")
    rng = np.random.default_rng(2)
    b = rng.standard_normal(K.shape[0])
    x = solve(K, b)
    assert residual_ok(K, x, b)


def test_solve_deterministic():
    rng = np.random.default_rng(3)
    A = sps.random(80, 80, density=0.1, random_state=4) + 10 * sps.identity(80)
    b = rng.standard_normal(80)
    assert solve(A, b).tobytes() == solve(A, b).tobytes()


def test_singular_reports_pivot():
    A = sps.csr_matrix(np.array([[1.0, 0, 0], [0, 0, 0], [0, 0, 2.0]]))
    with pytest.raises(SingularMatrixError) as info:
        solve(A, np.ones(3))
    assert info.value.pivot == 1
    with pytest.raises(SingularMatrixError):
        solve(sps.csr_matrix(np.array([[1.0, 2.0], [2.0, 4.0]])), np.ones(2))
    with pytest.raises(ValueError):
        solve(sps.csr_matrix(np.ones((2, 3))), np.ones(2))
