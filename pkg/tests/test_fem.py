import numpy as np
import pytest
import scipy.sparse as sps

from seepflow import fem
from seepflow.constitutive import d_water_content, inv_permeability, soil
from seepflow.linalg import solve
from seepflow.mesh import BOTTOM, LATERAL, TOP, TriMesh, build_profile_mesh, build_rectangle_mesh
from seepflow.scenario import SLOPE_BOTTOM, SLOPE_TOP

from oracles import basis_values, oracle_local_mass, triangle_quad

CLAY = soil("clay")


def unit_triangle():
    return TriMesh([(0, 0), (1, 0), (0, 1)], [(0, 1, 2)])


def uniform_dofs(mesh, u):
    return mesh.edge_normals @ np.asarray(u, float)


RECT = build_rectangle_mesh(1.0, 2.0, 0.25)
SLOPE = build_profile_mesh(SLOPE_TOP, SLOPE_BOTTOM, 0.5, 1.0)


# ------------------------------------------------------------------- basis

def test_basis_normal_traces():
    m = SLOPE
    for c in range(0, m.n_cells, 37):
        for i in range(3):
            e = m.cell_edges[c, i]
            a, b = m.nodes[m.edges[e]]
            pts = np.array([a, b, 0.5 * (a + b)])
            for j in range(3):
                vals = basis_values(m, c, pts)[j] @ m.edge_normals[e]
                expected = 1.0 if i == j else 0.0
                np.testing.assert_allclose(vals, expected, atol=1e-12)


# --------------------------------------------------------------------- A

def test_A_hypotenuse_entry_unit_triangle():
    m = unit_triangle()
    A = fem.assemble_A(m, 1.0).toarray()
    hyp = next(e for e in range(3) if set(m.edges[e]) == {1, 2})
    i = list(m.cell_edges[0]).index(hyp)
    assert A[hyp, hyp] == pytest.approx(oracle_local_mass(m, 0)[i, i], rel=1e-13)
    # |phi_hyp|^2 = 2 |x - (0,0)|^2 integrated over the triangle = 2 * (1/12 + 1/12)
    assert A[hyp, hyp] == pytest.approx(1.0 / 3.0, rel=1e-13)


def test_A_local_mass_against_high_order_quadrature():
    m = SLOPE
    lm = fem.local_mass(m)
    for c in range(0, m.n_cells, 11):
        ref = oracle_local_mass(m, c)
        np.testing.assert_allclose(lm[c], ref, rtol=1e-13, atol=1e-13 * np.abs(ref).max())


def test_A_symmetric_positive_definite():
    A = fem.assemble_A(SLOPE, 1.0)
    assert abs(A - A.T).max() <= 1e-14 * abs(A).max()
    rng = np.random.default_rng(0)
    X = rng.standard_normal((SLOPE.n_edges, 100))
    assert np.all(np.einsum("ik,ik->k", X, A @ X) > 0)


def test_A_linear_in_inverse_permeability():
    rng = np.random.default_rng(1)
    ik = rng.uniform(0.5, 2.0, RECT.n_cells)
    A1, A2 = fem.assemble_A(RECT, ik), fem.assemble_A(RECT, 2 * ik)
    assert abs(A2 - 2 * A1).max() <= 1e-14 * abs(A2).max()
    with pytest.raises(fem.AssemblyError):
        fem.assemble_A(RECT, np.zeros(RECT.n_cells))


# --------------------------------------------------------------------- B

def test_B_entries_unit_triangle():
    m = unit_triangle()
    B = fem.assemble_B(m).toarray()
    assert B.shape == (1, 3)
    lengths = {frozenset(m.edges[e]): m.edge_lengths[e] for e in range(3)}
    assert sorted(lengths.values()) == pytest.approx([1, 1, np.sqrt(2)])
    for i, e in enumerate(m.cell_edges[0]):
        assert B[0, e] == pytest.approx(-m.cell_signs[0, i] * m.edge_lengths[e], rel=1e-15)


def test_B_exact_entries_on_mesh():
    m = SLOPE
    B = fem.assemble_B(m).tocsr()
    for c in range(0, m.n_cells, 13):
        for i, e in enumerate(m.cell_edges[c]):
            assert B[c, e] == -m.cell_signs[c, i] * m.edge_lengths[e]
    assert B.nnz == 3 * m.n_cells


@pytest.mark.parametrize("u", [(1.0, 0.0), (0.0, -2e-6), (0.3, 0.7)])
def test_B_uniform_flow_divergence_free(u):
    q = uniform_dofs(SLOPE, u)
    assert np.abs(fem.assemble_B(SLOPE) @ q).max() <= 1e-12 * max(1.0, np.abs(u).max())
    np.testing.assert_allclose(fem.flux_at_centroids(SLOPE, q), np.tile(u, (SLOPE.n_cells, 1)),
                               atol=1e-12 * max(np.abs(u)))


# --------------------------------------------------------------------- E

def test_E_structure():
    m = build_rectangle_mesh(0.1, 5, 0.05)
    E = fem.assemble_E(m).tocsr()
    assert E.shape == (m.top_edges.size, m.n_edges)
    assert E.nnz == m.top_edges.size
    np.testing.assert_allclose(E.data, 0.05, rtol=1e-14)
    others = np.setdiff1d(np.arange(m.n_edges), m.top_edges)
    assert abs(E[:, others]).sum() == 0


def test_E_requires_top_edges():
    with pytest.raises(fem.AssemblyError):
        fem.assemble_E(unit_triangle())


# --------------------------------------------------------------------- D

def test_D_unit_triangle_against_quadrature():
    m = unit_triangle()
    D = fem.assemble_D(m)
    pts, w = triangle_quad(m.nodes[m.triangles[0]])
    phi = basis_values(m, 0, pts)
    for i, e in enumerate(m.cell_edges[0]):
        assert D[e] == pytest.approx(-np.sum(phi[i][:, 1] * w), abs=1e-15)
    # bottom edge, opposite vertex (0, 1): -sigma |e|/(2|T|) int (z - 1) = -(1)(-1/3) = 1/3
    bottom = next(e for e in range(3) if set(m.edges[e]) == {0, 1})
    assert D[bottom] == pytest.approx(1.0 / 3.0, rel=1e-14)


def test_D_mirror_negates():
    mirrored = TriMesh(SLOPE.nodes * [1.0, -1.0], SLOPE.triangles)
    np.testing.assert_array_equal(mirrored.edges.shape, SLOPE.edges.shape)
    np.testing.assert_allclose(fem.assemble_D(mirrored), -fem.assemble_D(SLOPE), atol=1e-14)


@pytest.mark.parametrize("u", [(1.0, 0.0), (0.2, -1.5)])
def test_D_uniform_field_integral(u):
    # sum_e D_e q_e = -int u . e_z
    q = uniform_dofs(SLOPE, u)
    assert fem.assemble_D(SLOPE) @ q == pytest.approx(-u[1] * SLOPE.areas.sum(), rel=1e-12,
                                                       abs=1e-12)


# ----------------------------------------------------------------- C, N_L

def test_C_examples():
    m = unit_triangle()
    th = np.array([0.3])
    np.testing.assert_array_equal(fem.assemble_C(m, th, th, 10.0), [0.0])
    assert fem.assemble_C(m, [0.4], [0.3], 10.0)[0] == pytest.approx(0.005)
    np.testing.assert_allclose(fem.assemble_C(RECT, np.full(RECT.n_cells, 0.2), 0.1, 20.0),
                               0.5 * fem.assemble_C(RECT, np.full(RECT.n_cells, 0.2), 0.1, 10.0))


def test_NL_examples():
    m = unit_triangle()
    assert fem.assemble_NL(m, 0.0, 5.0).count_nonzero() == 0
    assert fem.assemble_NL(m, 0.1, 5.0).toarray()[0, 0] == pytest.approx(0.01)
    psi = np.linspace(-2, 2, RECT.n_cells)
    d = fem.assemble_NL(RECT, d_water_content(psi, CLAY), 3600.0).diagonal()
    assert np.all(d[psi >= 0] == 0) and np.all(d[psi < 0] > 0)


# ---------------------------------------------------------------------- B_L

def test_BL_modes():
    Bt = fem.assemble_B(RECT).T
    assert abs(fem.assemble_BL("lscheme", RECT) - Bt).max() == 0
    rng = np.random.default_rng(2)
    q = rng.standard_normal(RECT.n_edges)
    sat = fem.assemble_BL("newton", RECT, np.full(RECT.n_cells, 0.5), q, CLAY)
    assert abs(sat - Bt).max() == 0
    with pytest.raises(fem.AssemblyError):
        fem.assemble_BL("newton", RECT)
    with pytest.raises(fem.AssemblyError):
        fem.assemble_BL("picard", RECT)


def test_newton_coupling_finite_difference():
    m = unit_triangle()
    rng = np.random.default_rng(3)
    q = rng.standard_normal(3) * 1e-7
    for psi0 in (-5.0, -0.7, -20.0):
        J = fem.newton_coupling(m, [psi0], q, CLAY).toarray()[:, 0]
        h = 1e-6 * abs(psi0)
        Ap = fem.assemble_A(m, inv_permeability(np.array([psi0 + h]), CLAY))
        Am = fem.assemble_A(m, inv_permeability(np.array([psi0 - h]), CLAY))
        fd = (Ap - Am) @ q / (2 * h)
        np.testing.assert_allclose(J, fd, rtol=1e-5)


def test_newton_coupling_on_mesh():
    rng = np.random.default_rng(4)
    psi = -rng.uniform(0.1, 5, RECT.n_cells)
    q = rng.standard_normal(RECT.n_edges) * 1e-7
    J = fem.newton_coupling(RECT, psi, q, CLAY)
    d = rng.standard_normal(RECT.n_cells)
    h = 1e-7
    fd = (fem.assemble_A(RECT, inv_permeability(psi + h * d, CLAY)) @ q
          - fem.assemble_A(RECT, inv_permeability(psi - h * d, CLAY)) @ q) / (2 * h)
    np.testing.assert_allclose(J @ d, fd, rtol=1e-5, atol=1e-5 * np.abs(fd).max())


# ----------------------------------------------------------------------- Q

def test_boundary_flux_Q():
    m = build_rectangle_mesh(0.1, 5, 0.05)
    top = m.top_edges
    q = np.zeros(m.n_edges)
    q[top] = -1e-6
    np.testing.assert_array_equal(fem.boundary_flux_Q(m, q, -1e-6), 0.0)
    # vertical rain -p e_z on a flat top gives p . n = -p
    p = 3e-7
    rain_n = (np.array([0.0, -p]) @ m.edge_normals[top].T)
    np.testing.assert_allclose(rain_n, -p)
    q[top] = 2e-6
    np.testing.assert_allclose(fem.boundary_flux_Q(m, q, 0.0), -2e-6)


def test_dof_layout():
    lay = fem.DofLayout.for_mesh(RECT, hybrid=True)
    assert lay.n_trace == RECT.top_edges.size
    assert lay.flux == slice(0, RECT.n_edges)
    assert lay.head == slice(RECT.n_edges, RECT.n_edges + RECT.n_cells)
    assert lay.trace.stop == lay.size
    assert fem.DofLayout.for_mesh(RECT).n_trace == 0


# ---------------------------------------------------------- patch tests

def _darcy_steady(mesh, inv_k, head_edges, head_values, fixed_edges, fixed_values):
    """Solve A q + B^T psi = D - <psi_D, v.n>, -B q = 0 with fixed flux dofs."""
    A = fem.assemble_A(mesh, inv_k)
    B = fem.assemble_B(mesh)
    rhs_q = fem.assemble_D(mesh)
    rhs_q[head_edges] -= head_values * mesh.edge_lengths[head_edges]
    K = sps.bmat([[A, B.T], [-B, None]], format="csr")
    rhs = np.concatenate([rhs_q, np.zeros(mesh.n_cells)])
    x = np.zeros(K.shape[0])
    x[fixed_edges] = fixed_values
    free = np.setdiff1d(np.arange(K.shape[0]), fixed_edges)
    rhs = rhs - K @ x
    x[free] = solve(K[free][:, free], rhs[free])
    return x[:mesh.n_edges], x[mesh.n_edges:], K, rhs_q


@pytest.mark.parametrize("mesh", [RECT, build_rectangle_mesh(0.1, 5, 0.05)], ids=["1x2", "column"])
def test_patch_uniform_vertical_flow(mesh):
    k = 1e-6
    H = mesh.nodes[:, 1].max()
    psi_bot, psi_top = 0.0, -3.0
    grad = (psi_top - psi_bot) / H
    qz = -k * (grad + 1.0)
    bot, top, lat = (mesh.edges_with_tag(t) for t in (BOTTOM, TOP, LATERAL))
    heads = np.concatenate([bot, top])
    vals = np.concatenate([np.full(bot.size, psi_bot), np.full(top.size, psi_top)])
    q, psi, _, _ = _darcy_steady(mesh, 1.0 / k, heads, vals, lat, np.zeros(lat.size))
    np.testing.assert_allclose(q, uniform_dofs(mesh, (0.0, qz)), atol=1e-10 * abs(qz))
    exact = psi_bot + grad * mesh.centroids[:, 1]
    np.testing.assert_allclose(psi, exact, atol=1e-10)


def test_hydrostatic_equilibrium_residual():
    mesh = SLOPE
    c = 1.5
    psi = c - mesh.centroids[:, 1]
    bot = mesh.edges_with_tag(BOTTOM)
    fixed = np.concatenate([mesh.edges_with_tag(TOP), mesh.edges_with_tag(LATERAL)])
    free = np.setdiff1d(np.arange(mesh.n_edges), fixed)
    psi_d = c - mesh.edge_midpoints[bot, 1]
    inv_k = inv_permeability(psi, CLAY)
    A = fem.assemble_A(mesh, inv_k)
    rhs = fem.assemble_D(mesh)
    rhs[bot] -= psi_d * mesh.edge_lengths[bot]
    res = A @ np.zeros(mesh.n_edges) + fem.assemble_B(mesh).T @ psi - rhs
    assert np.abs(res[free]).max() <= 1e-12
