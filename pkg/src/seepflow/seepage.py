"""Time stepping of Richards' equation with seepage conditions on the top boundary.

Three treatments of the top boundary are available:

``non_hybridized``
    The boundary head in the weak Dirichlet term is replaced by
    ``eps - [Q - gamma (psi - eps)]_+ / gamma`` with ``gamma = gamma0 h_e``.
    Active edges (indicator ``>= 0``) carry a penalized Neumann condition,
    inactive edges a weak Dirichlet condition ``psi = eps``.
``hybridized``
    A head trace ``lam`` per top edge closes the system through
    ``Q = -[lam - eps - gamma_hyb Q]_+ / gamma_hyb`` with
    ``gamma_hyb = gamma0_hyb / h_e``. Active edges impose ``lam = eps``,
    inactive edges impose ``q . n = p . n`` strongly.
``neumann_reference``
    Plain rainfall flux ``q . n = p . n`` on the whole top boundary.

Each step is a sequence of linear solves. The seepage non-linearity is handled
by a semismooth Newton (active set) update, the Van Genuchten laws by the
L-scheme, Newton's method or a combination of both.
"""

from __future__ import annotations

import logging
import time as _time
from dataclasses import dataclass, field, asdict
from fractions import Fraction

import numpy as np
import scipy.sparse as sps

from . import fem
from .constitutive import (MaterialParams, d_water_content, inv_permeability,
                           lscheme_bound, permeability, water_content)
from .linalg import solve
from .mesh import TriMesh

__all__ = [
    "SCHEMES",
    "LINEARIZATIONS",
    "ConvergenceError",
    "SolverSettings",
    "FieldState",
    "StepReport",
    "BoundaryConditions",
    "RichardsProblem",
    "active_set_nohyb",
    "active_set_hyb",
    "assemble_H_nohyb",
    "assemble_H_hyb",
    "eta_lin",
    "choose_linearization",
    "step",
    "boundary_head",
    "complementarity_residual",
    "mass_residual",
    "mass_residual_bound",
    "scalar_kkt_equivalence",
]

log = logging.getLogger(__name__)

SCHEMES = ("non_hybridized", "hybridized", "neumann_reference")
LINEARIZATIONS = ("lscheme", "newton", "combined")


class ConvergenceError(RuntimeError):
    """Raised when a step exhausts ``max_iter``; carries the :class:`StepReport`."""

    def __init__(self, report: "StepReport", state: "FieldState | None" = None):
        super().__init__(f"no convergence at t={report.time:g} s after "
                         f"{report.iterations} iterations (eta={report.eta_final:.3e})")
        self.report = report
        self.state = state


@dataclass
class SolverSettings:
    """Nonlinear solver configuration.

    ``accept_unconverged`` keeps the last iterate when ``max_iter`` is reached
    (the step is reported as not converged) instead of raising.
    """

    scheme: str = "hybridized"
    gamma0: float = 1e-10
    gamma0_hyb: float = 1.0
    epsilon_relax: float = 0.0
    linearization: str = "lscheme"
    L_override: float | None = None
    eps_a: float = 1e-7
    max_iter: int = 200
    combined_switch_eta: float = 1e-3
    combined_switch_iter: int = 100
    combined_require_both: bool = False
    accept_unconverged: bool = False
    relaxation: float = 1.0
    adaptive_relaxation: bool = True
    min_relaxation: float = 1.0 / 16.0
    saturation_chop: float | None = 1e-8

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.linearization not in LINEARIZATIONS:
            raise ValueError(f"unknown linearization {self.linearization!r}")
        if not (self.gamma0 > 0 and self.gamma0_hyb > 0):
            raise ValueError("penalty parameters must be positive")
        if not self.eps_a > 0:
            raise ValueError("eps_a must be positive")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be at least 1")
        if self.epsilon_relax < 0:
            raise ValueError("epsilon_relax must be non-negative")
        if self.L_override is not None and not self.L_override > 0:
            raise ValueError("L_override must be positive")
        if not (0 < self.min_relaxation <= self.relaxation <= 1):
            raise ValueError("need 0 < min_relaxation <= relaxation <= 1")
        if self.saturation_chop is not None and not self.saturation_chop > 0:
            raise ValueError("saturation_chop must be positive or None")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FieldState:
    """One time level: edge fluxes, cell heads and, if hybridized, top traces."""

    q: np.ndarray
    psi: np.ndarray
    lam: np.ndarray | None = None
    time: float = 0.0

    def copy(self) -> "FieldState":
        return FieldState(self.q.copy(), self.psi.copy(),
                          None if self.lam is None else self.lam.copy(), self.time)


@dataclass
class StepReport:
    time: float
    iterations: int = 0
    eta_history: list = field(default_factory=list)
    active_set_history: list = field(default_factory=list)
    linearization_history: list = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0
    dirichlet_edges: int = 0
    frozen: bool = False
    last_increment: float = float("nan")
    relaxation: float = 1.0

    @property
    def eta_final(self) -> float:
        return self.eta_history[-1] if self.eta_history else float("nan")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class BoundaryConditions:
    """Conditions on the non-top boundary.

    ``head_edges`` receive a weak Dirichlet head, ``flux_edges`` a strongly
    imposed normal flux (outward positive, m/s).
    """

    head_edges: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    head_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    flux_edges: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    flux_values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def no_flux_except(cls, mesh: TriMesh, head_edges=(), head_values=()) -> "BoundaryConditions":
        """No-flux on every non-top boundary edge not listed in ``head_edges``."""
        head_edges = np.asarray(head_edges, dtype=np.int64)
        head_values = np.broadcast_to(np.asarray(head_values, float), head_edges.shape).copy()
        bnd = mesh.boundary_edges
        rest = np.setdiff1d(bnd[mesh.tags[bnd] != 1], head_edges)
        return cls(head_edges, head_values, rest, np.zeros(rest.size))


class RichardsProblem:
    """Static data shared by all time steps of one simulation.

    Parameters
    ----------
    mesh : TriMesh
    material : MaterialParams
    rain : float, array or callable
        Outward normal rainfall component ``p . n`` on each top edge [m/s];
        a callable is evaluated as ``rain(t)``.
    bc : BoundaryConditions
    settings : SolverSettings
    """

    def __init__(self, mesh: TriMesh, material: MaterialParams, rain, bc: BoundaryConditions,
                 settings: SolverSettings):
        self.mesh = mesh
        self.material = material
        self._rain = rain
        self.bc = bc
        self.settings = settings
        self.top = mesh.top_edges
        if self.top.size == 0:
            raise ValueError("mesh has no top edges")
        self.top_cells = mesh.edge_cells[self.top, 0]
        self.top_len = mesh.edge_lengths[self.top]
        self.layout = fem.DofLayout.for_mesh(mesh, hybrid=settings.scheme == "hybridized")
        bnd = mesh.boundary_edges
        others = bnd[mesh.tags[bnd] != 1]
        covered = np.concatenate([bc.head_edges, bc.flux_edges])
        if np.unique(covered).size != covered.size or not np.array_equal(np.sort(covered), np.sort(others)):
            raise ValueError("every non-top boundary edge needs exactly one condition")
        self.B = fem.assemble_B(mesh)
        self.Bt = self.B.T.tocsr()
        self.D = fem.assemble_D(mesh)
        # weak Dirichlet data moved to the right-hand side
        self.D[bc.head_edges] -= bc.head_values * mesh.edge_lengths[bc.head_edges]
        self.E = fem.assemble_E(mesh)
        self.L = settings.L_override if settings.L_override is not None else lscheme_bound(material)
        self.theta_sup = lscheme_bound(material)

    def rain(self, t: float) -> np.ndarray:
        r = self._rain(t) if callable(self._rain) else self._rain
        return np.broadcast_to(np.asarray(r, dtype=float), self.top.shape).copy()

    @property
    def gamma(self) -> np.ndarray:
        return self.settings.gamma0 * self.top_len

    @property
    def gamma_hyb(self) -> np.ndarray:
        return self.settings.gamma0_hyb / self.top_len

    def fixed_flux(self, t: float):
        """Indices and values of strongly imposed flux dofs at time ``t``."""
        idx = [self.bc.flux_edges]
        val = [self.bc.flux_values]
        if self.settings.scheme == "neumann_reference":
            idx.append(self.top)
            val.append(self.rain(t))
        return np.concatenate(idx).astype(np.int64), np.concatenate(val)

    def trace(self, psi) -> np.ndarray:
        """Head trace on top edges: value of the adjacent cell."""
        return np.asarray(psi)[self.top_cells]

    def initial_state(self, psi0, t0: float = 0.0) -> FieldState:
        psi0 = np.broadcast_to(np.asarray(psi0, float), (self.mesh.n_cells,)).copy()
        q = np.zeros(self.mesh.n_edges)
        idx, val = self.fixed_flux(t0)
        q[idx] = val
        lam = self.trace(psi0) if self.layout.hybrid else None
        return FieldState(q, psi0, lam, t0)

    def with_settings(self, settings: SolverSettings) -> "RichardsProblem":
        return RichardsProblem(self.mesh, self.material, self._rain, self.bc, settings)


# --------------------------------------------------------------- active sets

def active_set_nohyb(Q, psi_trace, gamma, epsilon_relax=0.0) -> np.ndarray:
    """Edges where ``Q - gamma (psi - eps) >= 0`` (penalized Neumann regime)."""
    return np.asarray(Q) - np.asarray(gamma) * (np.asarray(psi_trace) - epsilon_relax) >= 0.0


def active_set_hyb(lam, Q, gamma_hyb, epsilon_relax=0.0) -> np.ndarray:
    """Edges where ``(lam - eps) - gamma_hyb Q >= 0`` (Dirichlet regime)."""
    return (np.asarray(lam) - epsilon_relax) - np.asarray(gamma_hyb) * np.asarray(Q) >= 0.0


def assemble_H_nohyb(mesh: TriMesh, active, gamma, Q=None, psi_trace=None, epsilon_relax=0.0):
    """Penalty blocks of the non-hybridized iteration.

    Returns ``(H_q, H_psi, h_vec)``. ``h_vec`` needs the current ``Q`` and head
    trace; it is zero when they are omitted.
    """
    top = mesh.top_edges
    cells = mesh.edge_cells[top, 0]
    le = mesh.edge_lengths[top]
    act = np.asarray(active, dtype=bool)
    gamma = np.broadcast_to(np.asarray(gamma, float), top.shape)
    e, c = top[act], cells[act]
    H_q = sps.csr_matrix((le[act] / gamma[act], (e, e)), shape=(mesh.n_edges, mesh.n_edges))
    H_psi = sps.csr_matrix((le[act], (e, c)), shape=(mesh.n_edges, mesh.n_cells))
    h_vec = np.zeros(mesh.n_edges)
    if Q is not None and psi_trace is not None:
        ind = np.asarray(Q) - gamma * (np.asarray(psi_trace) - epsilon_relax)
        h_vec[top] = np.where(act, le / gamma * np.maximum(ind, 0.0), 0.0)
    return H_q, H_psi, h_vec


def assemble_H_hyb(mesh: TriMesh, active, gamma_hyb, lam=None, Q=None, epsilon_relax=0.0):
    """Blocks of the hybridized trace equation.

    Returns ``(H_q, H_lam, h_vec)`` with shapes ``(n_trace, n_flux)``,
    ``(n_trace, n_trace)`` and ``(n_trace,)``.
    """
    top = mesh.top_edges
    nt = top.size
    le = mesh.edge_lengths[top]
    act = np.asarray(active, dtype=bool)
    gh = np.broadcast_to(np.asarray(gamma_hyb, float), top.shape)
    rows = np.flatnonzero(act)
    H_q = sps.csr_matrix((-le[act], (rows, top[act])), shape=(nt, mesh.n_edges))
    H_lam = sps.csr_matrix((-le[act] / gh[act], (rows, rows)), shape=(nt, nt))
    h_vec = np.zeros(nt)
    if lam is not None and Q is not None:
        ind = np.asarray(lam) - epsilon_relax - gh * np.asarray(Q)
        h_vec = np.where(act, le / gh * np.maximum(ind, 0.0), 0.0)
    return H_q, H_lam, h_vec


# ------------------------------------------------------------ error measures

def eta_lin(mesh: TriMesh, state_k: FieldState, state_k1: FieldState, l_per_cell,
            dt: float, material: MaterialParams) -> float:
    """Linearization error between two iterates.

    ``sqrt( int L (dpsi)^2 + dt int K(psi_k) |K^-1(psi_k1) q_k1 - K^-1(psi_k) q_k|^2 )``
    with cellwise constant coefficients.
    """
    lv = np.broadcast_to(np.asarray(l_per_cell, float), (mesh.n_cells,))
    dpsi = state_k1.psi - state_k.psi
    head_part = np.sum(lv * dpsi ** 2 * mesh.areas)
    ik1 = inv_permeability(state_k1.psi, material)
    ik0 = inv_permeability(state_k.psi, material)
    c = ik1[:, None] * state_k1.q[mesh.cell_edges] - ik0[:, None] * state_k.q[mesh.cell_edges]
    flux_sq = np.einsum("ti,tij,tj->t", c, fem.local_mass(mesh), c)
    flux_part = dt * np.sum(permeability(state_k.psi, material) * flux_sq)
    return float(np.sqrt(max(head_part + flux_part, 0.0)))


def choose_linearization(settings: SolverSettings, k: int, eta: float | None) -> str:
    """Linearization used at iteration ``k`` given the last ``eta``.

    In combined mode the L-scheme runs until ``eta < combined_switch_eta`` or
    ``k >= combined_switch_iter`` (both, if ``combined_require_both``).
    """
    if settings.linearization != "combined":
        return settings.linearization
    small = eta is not None and eta < settings.combined_switch_eta
    late = k >= settings.combined_switch_iter
    switch = (small and late) if settings.combined_require_both else (small or late)
    return "newton" if switch else "lscheme"


def boundary_head(problem: RichardsProblem, state: FieldState, rain=None) -> np.ndarray:
    """Head the scheme imposes on each top edge.

    Hybridized: the trace ``lam``. Non-hybridized: the argument of the weak
    boundary term, ``eps - [Q - gamma (psi - eps)]_+ / gamma``. Neumann
    reference: the adjacent cell value.
    """
    s = problem.settings
    if s.scheme == "hybridized":
        return state.lam.copy()
    tr = problem.trace(state.psi)
    if s.scheme == "neumann_reference":
        return tr
    rain = problem.rain(state.time) if rain is None else rain
    Q = fem.boundary_flux_Q(problem.mesh, state.q, rain)
    g = problem.gamma
    return s.epsilon_relax - np.maximum(Q - g * (tr - s.epsilon_relax), 0.0) / g


def complementarity_residual(mesh: TriMesh, q, head, rain, epsilon_relax=0.0) -> np.ndarray:
    """Per top edge ``(max(0, head - eps), max(0, Q), |Q (head - eps)|)``."""
    Q = fem.boundary_flux_Q(mesh, q, rain)
    h = np.asarray(head, float) - epsilon_relax
    return np.stack([np.maximum(h, 0.0), np.maximum(Q, 0.0), np.abs(Q * h)], axis=1)


def mass_residual(mesh: TriMesh, psi_old, psi_new, q_new, dt, material) -> np.ndarray:
    """Cellwise ``(theta_new - theta_old) |T| / dt + int_T div q`` [m^2/s]."""
    dtheta = water_content(psi_new, material) - water_content(psi_old, material)
    div = -(fem.assemble_B(mesh) @ q_new)
    return dtheta * mesh.areas / dt + div


def mass_residual_bound(problem: RichardsProblem, report: StepReport, dt: float,
                        solver_slack: float = 1e-12) -> np.ndarray:
    """Cellwise bound on :func:`mass_residual` after a converged step.

    The only imbalance left is the linearization error of the last iteration,
    at most ``|T| / dt * max(L, sup theta') * |dpsi|`` with ``dpsi`` the last
    head increment, plus ``solver_slack`` [m^2/s] for the linear solve.
    """
    lip = max(problem.L, problem.theta_sup)
    return problem.mesh.areas / dt * lip * report.last_increment + solver_slack


def scalar_kkt_equivalence(a, b, gamma, tol: float = 0.0):
    """Evaluate both sides of ``a, b <= 0, ab = 0  <=>  a = -[b - gamma a]_+ / gamma``.

    Works on floats (with absolute tolerance ``tol``) and on
    :class:`fractions.Fraction` inputs (exact).
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    zero = Fraction(0) if isinstance(a, Fraction) else 0.0
    lhs = a <= tol and b <= tol and abs(a * b) <= tol * max(1.0, abs(a), abs(b))
    rhs = abs(a + max(zero, b - gamma * a) / gamma) <= tol * max(1.0, abs(a), abs(b))
    return bool(lhs), bool(rhs)


# ----------------------------------------------------------------- iteration

def _linearization_coeff(problem, mode, psi_k):
    if mode == "lscheme":
        return np.full(problem.mesh.n_cells, problem.L)
    return np.asarray(d_water_content(psi_k, problem.material))


def _newton_advisory(problem, state_n, dt):
    mesh = problem.mesh
    theta_m = float(np.min(d_water_content(state_n.psi, problem.material)))
    bound = theta_m ** 3 * mesh.h_max ** 2  # C = 1, r = 1, d = 2
    if dt > bound:
        log.debug("Newton step-size advisory: dt=%g exceeds C*theta_m^3*h^2=%g (C=1)", dt, bound)


def step(problem: RichardsProblem, state_n: FieldState, dt: float,
         settings: SolverSettings | None = None):
    """Advance one implicit Euler step of size ``dt``.

    Returns ``(state, report)``. Raises :class:`ConvergenceError` when
    ``max_iter`` is exhausted, unless ``settings.accept_unconverged`` is set.
    """
    s = settings or problem.settings
    mesh, mat = problem.mesh, problem.material
    lay = problem.layout
    nf, nh, nt = lay.n_flux, lay.n_head, lay.n_trace
    t1 = state_n.time + dt
    rain = problem.rain(t1)
    fixed_idx, fixed_val = problem.fixed_flux(t1)
    free = np.ones(lay.size, dtype=bool)
    free[fixed_idx] = False
    free_idx = np.flatnonzero(free)
    eps = s.epsilon_relax
    top, tcells, tlen = problem.top, problem.top_cells, problem.top_len
    gamma, gamma_h = problem.gamma, problem.gamma_hyb

    theta_n = water_content(state_n.psi, mat)
    cur = state_n.copy()
    cur.time = t1
    cur.q[fixed_idx] = fixed_val
    if lay.hybrid and cur.lam is None:
        cur.lam = problem.trace(cur.psi)
    report = StepReport(time=t1)
    wall0 = _time.perf_counter()
    if s.linearization != "lscheme":
        _newton_advisory(problem, state_n, dt)

    def active_of(st):
        if s.scheme == "neumann_reference":
            return np.zeros(top.size, dtype=bool)
        Q = fem.boundary_flux_Q(mesh, st.q, rain)
        if s.scheme == "non_hybridized":
            return active_set_nohyb(Q, problem.trace(st.psi), gamma, eps)
        return active_set_hyb(st.lam, Q, gamma_h, eps)

    seen = set()
    frozen = None
    eta = None
    w = s.relaxation
    last_cut = 0
    mode = None
    active = active_of(cur)
    for k in range(int(s.max_iter)):
        # the switch to Newton in combined mode is one-way
        mode = "newton" if mode == "newton" else choose_linearization(s, k, eta)
        if frozen is not None:
            active = frozen
        lcoef = _linearization_coeff(problem, mode, cur.psi)
        A = fem.assemble_A(mesh, inv_permeability(cur.psi, mat))
        N = fem.assemble_NL(mesh, lcoef, dt)
        C = fem.assemble_C(mesh, theta_n, water_content(cur.psi, mat), dt)
        rhs_q = problem.D.copy()
        if mode == "newton":
            J = fem.newton_coupling(mesh, cur.psi, cur.q, mat)
            BL = (problem.Bt + J).tocsr()
            rhs_q += J @ cur.psi
        else:
            BL = problem.Bt
        rhs_psi = C + N @ cur.psi
        Q = fem.boundary_flux_Q(mesh, cur.q, rain)

        if s.scheme == "non_hybridized":
            Hq, Hp, hv = assemble_H_nohyb(mesh, active, gamma, Q, problem.trace(cur.psi), eps)
            rhs_q += Hq @ cur.q + Hp @ cur.psi + hv
            rhs_q[top] -= eps * tlen
            blocks = [[A + Hq, BL + Hp], [-problem.B, N]]
            rhs = [rhs_q, rhs_psi]
        elif s.scheme == "hybridized":
            Hq, Hl, hv = assemble_H_hyb(mesh, active, gamma_h, cur.lam, Q, eps)
            rhs_l = tlen * rain + Hq @ cur.q + Hl @ cur.lam + hv
            blocks = [[A, BL, problem.E.T], [-problem.B, N, None], [problem.E + Hq, None, Hl]]
            rhs = [rhs_q, rhs_psi, rhs_l]
        else:
            blocks = [[A, BL], [-problem.B, N]]
            rhs = [rhs_q, rhs_psi]

        K = sps.bmat(blocks, format="csr")
        b = np.concatenate(rhs)
        x_fixed = np.zeros(lay.size)
        x_fixed[fixed_idx] = fixed_val
        b_free = (b - K @ x_fixed)[free_idx]
        K_ff = K[free_idx][:, free_idx]
        x = x_fixed.copy()
        x[free_idx] = solve(K_ff, b_free)

        full = FieldState(x[:nf], x[nf:nf + nh], x[nf + nh:] if lay.hybrid else None, t1)
        eta = eta_lin(mesh, cur, full, lcoef, dt, mat)
        hist = report.eta_history
        if not (s.adaptive_relaxation and mode == "newton"):
            pass
        elif k - last_cut >= 3 and len(hist) >= 3 and eta > 0.999 * min(hist[-3:]):
            # Newton made no progress over three iterations: damp the update
            w = max(0.5 * w, s.min_relaxation)
            last_cut = k
        elif hist and eta < 0.5 * hist[-1]:
            w = min(2.0 * w, s.relaxation)
        if eta <= s.eps_a:
            # accepted iterates solve the linear system exactly (local mass balance)
            nxt = full
        else:
            psi_new = cur.psi + w * (full.psi - cur.psi)
            if s.saturation_chop is not None:
                # a head crossing the saturation kink first lands just below it
                c = s.saturation_chop
                cross = (cur.psi < -c) & (psi_new > 0.0) | (cur.psi > 0.0) & (psi_new < -c)
                psi_new[cross] = -c
            nxt = FieldState(cur.q + w * (full.q - cur.q), psi_new,
                             cur.lam + w * (full.lam - cur.lam) if lay.hybrid else None, t1)
        report.last_increment = float(np.max(np.abs(full.psi - cur.psi)))
        report.relaxation = w
        report.eta_history.append(eta)
        report.active_set_history.append(int(np.count_nonzero(active)))
        report.linearization_history.append(mode)
        report.iterations = k + 1
        cur = nxt

        new_active = active_of(cur)
        stable = frozen is not None or np.array_equal(new_active, active)
        if eta <= s.eps_a and stable:
            if frozen is not None and not np.array_equal(new_active, frozen):
                # frozen set no longer consistent: release it and keep iterating
                frozen = None
                active = new_active
                continue
            report.converged = True
            break
        key = new_active.tobytes()
        hist = report.eta_history
        if (frozen is None and key in seen and len(hist) > 5
                and hist[-1] > 0.99 * hist[-6]):
            frozen = new_active.copy()
            report.frozen = True
            log.debug("active set cycling at t=%g, freezing after %d iterations", t1, k + 1)
        seen.add(key)
        active = new_active

    report.wall_time = _time.perf_counter() - wall0
    final_active = active_of(cur)
    if s.scheme == "non_hybridized":
        report.dirichlet_edges = int(np.count_nonzero(~final_active))
    elif s.scheme == "hybridized":
        report.dirichlet_edges = int(np.count_nonzero(final_active))
    if not report.converged:
        if s.accept_unconverged:
            log.warning("step to t=%g s not converged after %d iterations (eta=%.3e); "
                        "keeping last iterate", t1, report.iterations, report.eta_final)
            return cur, report
        raise ConvergenceError(report, cur)
    return cur, report
