"""End-to-end acceptance checks on the named scenarios.

Each test prints one ``PASS criterion N: ...`` or ``FAIL criterion N: ...``
line straight to the terminal (capture is bypassed), then asserts. Scenario
runs are cached per session so criteria 6 and 7 reuse the runs of 1 to 5.
"""
import functools
import itertools
import logging
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from seepflow.scenario import preset, simulate, with_solver
from seepflow.seepage import (boundary_head, complementarity_residual, mass_residual,
                              mass_residual_bound)

pytestmark = pytest.mark.slow

HOUR = 3600.0
SEEPAGE = ("non_hybridized", "hybridized")
SCHEMES = ("neumann_reference",) + SEEPAGE
TESTS = Path(__file__).resolve().parent


@functools.lru_cache(maxsize=None)
def run(name, scheme=None, **solver):
    cfg = preset(name)
    if scheme is not None:
        solver["scheme"] = scheme
    cfg = with_solver(cfg, **solver)
    prev = logging.getLogger("seepflow").level
    logging.getLogger("seepflow").setLevel(logging.ERROR)
    try:
        t0 = time.perf_counter()
        res = simulate(cfg)
        res.wall = time.perf_counter() - t0
    finally:
        logging.getLogger("seepflow").setLevel(prev)
    return res


def linf(a, b):
    return float(np.max(np.abs(a - b)))


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}", flush=True)
        assert ok, detail
    return emit


# runs whose converged steps feed criteria 6 and 7
def criteria_1_to_5_runs():
    out = {}
    for name in ("rect_01", "rect_1", "rect_10"):
        for s in SCHEMES:
            out[f"{name}/{s}"] = run(name, s)
    for g in (1e-10, 1e10):
        out[f"rect_10/hybridized/gamma0_hyb={g:g}"] = run("rect_10", "hybridized", gamma0_hyb=g)
    for s in SCHEMES:
        out[f"rect_silt_relaxed/{s}"] = run("rect_silt_relaxed", s)
    return out


def converged_steps(res):
    prev = res.initial
    for st, rep in zip(res.states, res.reports):
        if rep.converged:
            yield prev, st, rep
        prev = st


def test_criterion_1_rect_01_consistency(verdict):
    runs = {s: run("rect_01", s) for s in SCHEMES}
    ref = runs["neumann_reference"]
    d_non = linf(runs["non_hybridized"].final.psi, ref.final.psi)
    d_hyb = linf(runs["hybridized"].final.psi, ref.final.psi)
    wall = sum(r.wall for r in runs.values())
    done = all(r.completed for r in runs.values())
    ok = done and d_non <= 5e-3 and d_hyb <= 5e-4 and wall < 60
    verdict(1, ok, f"rect_01 L-inf vs reference: non-hyb {d_non:.2e} (<= 5e-3), "
                   f"hyb {d_hyb:.2e} (<= 5e-4), wall {wall:.1f} s (< 60)")


def test_criterion_2_rect_1_regime_switch(verdict):
    runs = {s: run("rect_1", s) for s in SCHEMES}
    ref = runs["neumann_reference"]
    d_non = linf(runs["non_hybridized"].final.psi, ref.final.psi)
    d_hyb = linf(runs["hybridized"].final.psi, ref.final.psi)
    late = {s: runs[s].reports[-1].dirichlet_edges for s in SEEPAGE}
    its = {s: sum(r.iterations for r in runs[s].reports) for s in SCHEMES}
    ratio = max(its.values()) / min(its.values())
    ok = (all(r.completed for r in runs.values()) and d_non <= 1e-2 and d_hyb <= 3e-3
          and all(v > 0 for v in late.values()) and ratio <= 3)
    verdict(2, ok, f"rect_1 L-inf: non-hyb {d_non:.2e} (<= 1e-2), hyb {d_hyb:.2e} (<= 3e-3); "
                   f"Dirichlet edges at t_fin {late}; total iterations {its}, ratio {ratio:.2f}")


def test_criterion_3_rect_10_filled(verdict):
    worst_psi, worst_head = {}, {}
    done = True
    for s in SEEPAGE:
        res = run("rect_10", s)
        done &= res.completed
        eps = res.config.solver.epsilon_relax
        worst_psi[s] = max((np.max(np.abs(st.psi)) for st in res.states
                            if st.time >= 40 * HOUR - 1e-6), default=np.inf)
        worst_head[s] = max(np.max(boundary_head(res.problem, st)) - eps
                            for _, st, _ in converged_steps(res))
    ok = done and max(worst_psi.values()) <= 1e-6 and max(worst_head.values()) <= 1e-8
    verdict(3, ok, "rect_10 max|psi| for t >= 40 h: "
            + ", ".join(f"{s} {v:.2e}" for s, v in worst_psi.items()) + " (<= 1e-6); "
            "top head - eps: " + ", ".join(f"{s} {v:.2e}" for s, v in worst_head.items())
            + " (<= 1e-8)")


def test_criterion_4_hybrid_penalty_independence(verdict):
    finals = {g: run("rect_10", "hybridized", gamma0_hyb=g) for g in (1e-10, 1.0, 1e10)}
    done = all(r.completed for r in finals.values())
    pairs = {(a, b): linf(finals[a].final.psi, finals[b].final.psi)
             for a, b in itertools.combinations(finals, 2)}
    worst = max(pairs.values())
    ok = done and worst <= 1e-3
    verdict(4, ok, "rect_10 hyb pairwise L-inf over gamma0_hyb: "
            + ", ".join(f"{a:g}/{b:g} {d:.2e}" for (a, b), d in pairs.items()) + " (<= 1e-3)")


def test_criterion_5_relaxation_delay(verdict):
    runs = {s: run("rect_silt_relaxed", s) for s in SCHEMES}
    ref = runs["neumann_reference"].final.psi
    d_non = linf(runs["non_hybridized"].final.psi, ref)
    d_hyb = linf(runs["hybridized"].final.psi, ref)
    ok = all(r.completed for r in runs.values()) and d_hyb < d_non
    verdict(5, ok, f"silt eps = 1e-2 m, L-inf vs reference at 1000 h: hyb {d_hyb:.4e} "
                   f"< non-hyb {d_non:.4e} required")


def test_criterion_6_mass_conservation(verdict):
    worst_ratio, worst_sat, steps = 0.0, 0.0, 0
    for res in criteria_1_to_5_runs().values():
        for prev, st, rep in converged_steps(res):
            r = mass_residual(res.mesh, prev.psi, st.psi, st.q, res.config.dt, res.problem.material)
            b = mass_residual_bound(res.problem, rep, res.config.dt)
            worst_ratio = max(worst_ratio, float(np.max(np.abs(r) / b)))
            sat = (prev.psi >= 0) & (st.psi >= 0)
            if sat.any():
                worst_sat = max(worst_sat, float(np.max(np.abs(r[sat]))))
            steps += 1
    ok = steps > 0 and worst_ratio <= 1.0 and worst_sat <= 1e-9
    verdict(6, ok, f"{steps} converged steps: max |residual|/bound {worst_ratio:.2e} (<= 1), "
                   f"saturated-cell residual {worst_sat:.2e} (<= 1e-9)")


def test_criterion_7_complementarity(verdict):
    worst = {s: np.zeros(3) for s in SEEPAGE}
    for res in criteria_1_to_5_runs().values():
        s = res.config.solver.scheme
        if s not in SEEPAGE:
            continue
        eps = res.config.solver.epsilon_relax
        for _, st, _ in converged_steps(res):
            rain = res.problem.rain(st.time)
            head = boundary_head(res.problem, st, rain)
            c = complementarity_residual(res.mesh, st.q, head, rain, eps)
            worst[s] = np.maximum(worst[s], c.max(axis=0))
    tol = np.array([1e-8, 1e-10, 1e-14])
    ok = all(np.all(w <= tol) for w in worst.values())
    verdict(7, ok, "max (head excess, flux excess, product) vs (1e-8, 1e-10, 1e-14): "
            + "; ".join(f"{s} ({w[0]:.2e}, {w[1]:.2e}, {w[2]:.2e})" for s, w in worst.items()))


def test_criterion_8_sand_newton(verdict):
    runs = {s: run("rect_sand", s, linearization="newton") for s in SEEPAGE}
    its = {s: max(r.iterations for r in runs[s].reports) for s in SEEPAGE}
    steps_ok = all(r.completed and all(rep.converged for rep in r.reports)
                   and len(r.reports) == r.config.n_steps for r in runs.values())
    d = linf(runs["non_hybridized"].final.psi, runs["hybridized"].final.psi)
    ok = steps_ok and max(its.values()) <= 200 and d <= 1e-10
    verdict(8, ok, f"sand Newton: all steps converged {steps_ok}, max iterations {its} "
                   f"(<= 200), L-inf between schemes {d:.2e} (<= 1e-10)")


def test_criterion_9_slope_exit_point(verdict):
    res = run("slope_exitpoint")
    mesh, st = res.mesh, res.final
    top = mesh.top_edges
    cells = mesh.edge_cells[top, 0]
    rain = res.problem.rain(st.time)
    head = boundary_head(res.problem, st, rain)
    # the water table starts inside the domain; at t_fin the psi = 0 level set
    # lies on the surface wherever a saturated cell sees a zero boundary head
    started_inside = bool(np.any(res.initial.psi < 0))
    on_surface = (st.psi[cells] >= 0) & (np.abs(head) <= 1e-8)
    meets = started_inside and bool(on_surface.any())
    qn = st.q[top]
    # slope toe: lower break point of the ground profile
    toe_pt = np.array(res.config.geometry.top[1])
    toe = int(np.argmin(np.linalg.norm(mesh.edge_midpoints[top] - toe_pt, axis=1)))
    ok = (res.completed and abs(st.time - 20 * HOUR) < 1e-6 and meets
          and qn[toe] > 0 and head[toe] <= 1e-8)
    verdict(9, ok, f"slope at {st.time / HOUR:.0f} h: water table meets the surface {meets} "
                   f"({int(on_surface.sum())} of {top.size} top edges on it); toe q.n {qn[toe]:.2e} "
                   f"(> 0), toe head {head[toe]:.2e} (<= 1e-8)")


def test_criterion_10_property_suites(verdict):
    selection = [
        "test_seepage.py::test_kkt_equivalence_exact_rationals",
        "test_seepage.py::test_kkt_equivalence_floats",
        "test_seepage.py::test_hydrostatic_step_is_fixed_point",
        "test_constitutive.py",
        "test_fem.py::test_patch_uniform_vertical_flow",
        "test_fem.py::test_hydrostatic_equilibrium_residual",
        "test_mesh.py::test_invariants",
    ]
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           *[str(TESTS / s) for s in selection]],
                          cwd=TESTS, capture_output=True, text=True)
    wall = time.perf_counter() - t0
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr
    ok = proc.returncode == 0 and wall < 120
    verdict(10, ok, f"property suites: {summary} ({wall:.1f} s, < 120)")
