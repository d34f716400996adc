"""Command-line driver.

Subcommands
-----------
run       time loop of one scenario with its outputs
compare   neumann_reference, non_hybridized and hybridized on the same scenario
sweep     one run per penalty value, in parallel, with L-inf differences
meshgen   write the scenario mesh in the ASCII mesh format
presets   list the named scenarios

Exit codes: 0 success, 1 input error, 2 non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .mesh import MeshError, export_mesh
from .io_output import OutputRequest, OutputWriter
from .scenario import (PRESET_NAMES, ConfigError, apply_overrides, build_mesh, build_problem,
                       load_config, preset, simulate, with_solver)

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_INPUT", "EXIT_NONCONVERGED"]

log = logging.getLogger("seepflow")

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2
HOUR = 3600.0

PRESET_SUMMARY = {
    "rect_01": "clay column, p/K_S = 0.1, 10 steps of 10 h",
    "rect_1": "clay column, p/K_S = 1, 10 steps of 5 h",
    "rect_10": "clay column, p/K_S = 10, 10 steps of 5 h",
    "rect_silt_relaxed": "silt column, p/K_S = 1, eps = 1e-2 m, 1000 steps of 1 h",
    "rect_sand": "sand column, p/K_S = 10, Newton, 12 steps of 0.5 h",
    "slope_wetting": "two-plateau slope, dry start (psi = -20 m)",
    "slope_exitpoint": "two-plateau slope, water table at the toe",
    "natural_slope_1": "600 m hillside, dry start, bottom head compatible",
    "natural_slope_2": "600 m hillside, phreatic line inside, no-flux bottom",
}


class InputError(Exception):
    pass


def _config(args):
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = preset(args.preset)
    if args.set:
        cfg = apply_overrides(cfg, args.set)
    return cfg


def _out_dir(args, cfg) -> Path:
    return Path(args.out) if args.out else Path("out") / cfg.name


def _say(args, msg):
    if not args.quiet:
        print(msg, flush=True)


def _step_line(n, state, rep):
    tag = "" if rep.converged else "  NOT CONVERGED"
    return (f"step {n + 1:4d}  t = {state.time / HOUR:9.3f} h  iterations {rep.iterations:4d}  "
            f"eta {rep.eta_final:.3e}  dirichlet edges {rep.dirichlet_edges}{tag}")


# ---------------------------------------------------------------- commands

def cmd_run(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    requests = cfg.outputs or (OutputRequest("vtk_series", 1, cfg.name),
                               OutputRequest("report_json", 1, cfg.name))
    mesh = build_mesh(cfg)
    writer = OutputWriter(build_problem(cfg, mesh), requests, out,
                          include_timing=not args.no_timing)

    def observer(n, state, rep):
        writer(n, state, rep)
        _say(args, _step_line(n, state, rep))

    res = simulate(cfg, mesh=mesh, observer=observer, keep_states=False)
    files = writer.finish(meta={"scenario": cfg.name, "completed": res.completed})
    _say(args, f"wrote {len(files)} files to {out}")
    if not res.completed:
        print(f"error: {res.error}", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def _run_scheme(cfg, scheme, **changes):
    return simulate(with_solver(cfg, scheme=scheme, **changes))


def cmd_compare(args) -> int:
    cfg = _config(args)
    if cfg.rain_ratio > 1:
        log.warning("rain_ratio %g > 1: the Neumann reference ponds and is not a physical "
                    "reference", cfg.rain_ratio)
    out = _out_dir(args, cfg)
    runs = {s: _run_scheme(cfg, s) for s in ("neumann_reference", "non_hybridized", "hybridized")}
    ref = runs["neumann_reference"]
    n = min(len(r.states) for r in runs.values())
    rows = []
    for k in range(n):
        t = ref.states[k].time
        d = [float(np.max(np.abs(runs[s].states[k].psi - ref.states[k].psi)))
             for s in ("non_hybridized", "hybridized")]
        rows.append((t / HOUR, *d))
    path = out / f"{cfg.name}_compare.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_h", "linf_non_hybridized", "linf_hybridized"])
        w.writerows([[repr(v) for v in r] for r in rows])
    if not args.quiet:
        print(f"{'time [h]':>10} {'non-hyb':>12} {'hyb':>12}")
        for t, a, b in rows:
            print(f"{t:10.3f} {a:12.3e} {b:12.3e}")
        print(f"wrote {path}")
    failed = [s for s, r in runs.items() if not r.completed]
    if failed:
        print(f"error: no convergence for {', '.join(failed)}", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def _sweep_one(cfg, scheme, param, value):
    res = simulate(with_solver(cfg, scheme=scheme, **{param: value}), keep_states=False)
    return (res.completed, res.final.psi, sum(r.iterations for r in res.reports), res.error)


def _parse_values(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"cannot parse values {text!r}") from None
    if not vals:
        raise InputError("sweep needs at least one value")
    if any(not v > 0 for v in vals):
        raise InputError("penalty values must be positive")
    return vals


def cmd_sweep(args) -> int:
    cfg = _config(args)
    values = _parse_values(args.values)
    scheme = "non_hybridized" if args.param == "gamma0" else "hybridized"
    baseline = args.baseline or ("neumann" if args.param == "gamma0" else "first")
    out = _out_dir(args, cfg)
    jobs = args.jobs or len(values)
    with ProcessPoolExecutor(max_workers=max(1, min(jobs, len(values)))) as pool:
        futures = [pool.submit(_sweep_one, cfg, scheme, args.param, v) for v in values]
        results = [f.result() for f in futures]
    if baseline == "neumann":
        base = simulate(with_solver(cfg, scheme="neumann_reference"), keep_states=False)
        base_psi = base.final.psi if base.completed else None
    else:
        base_psi = results[0][1] if results[0][0] else None
    rows = []
    for v, (ok, psi, its, err) in zip(values, results):
        diff = float(np.max(np.abs(psi - base_psi))) if ok and base_psi is not None else float("nan")
        rows.append((v, ok, its, diff))
        if not ok:
            log.warning("%s=%g did not converge: %s", args.param, v, err)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{cfg.name}_sweep_{args.param}.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([args.param, "converged", "iterations", f"linf_vs_{baseline}"])
        w.writerows([[repr(v), int(ok), its, repr(d)] for v, ok, its, d in rows])
    pair_path = out / f"{cfg.name}_sweep_{args.param}_pairwise.csv"
    with open(pair_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"{args.param}_a", f"{args.param}_b", "linf"])
        for (va, ra), (vb, rb) in itertools.combinations(zip(values, results), 2):
            d = float(np.max(np.abs(ra[1] - rb[1]))) if ra[0] and rb[0] else float("nan")
            w.writerow([repr(va), repr(vb), repr(d)])
    if not args.quiet:
        print(f"{args.param:>12} {'ok':>3} {'iters':>6} {'L-inf vs ' + baseline:>18}")
        for v, ok, its, d in rows:
            print(f"{v:12.3g} {int(ok):3d} {its:6d} {d:18.3e}")
        print(f"wrote {path} and {pair_path}")
    return EXIT_OK if all(r[1] for r in rows) else EXIT_NONCONVERGED


def cmd_meshgen(args) -> int:
    cfg = _config(args)
    mesh = build_mesh(cfg)
    path = Path(args.out) if args.out else Path(f"{cfg.name}.mesh")
    if path.is_dir() or (args.out and args.out.endswith(("/", "\\"))):
        path = path / f"{cfg.name}.mesh"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(export_mesh(mesh))
    _say(args, f"{mesh.n_cells} triangles, {mesh.n_nodes} nodes, {mesh.n_edges} edges "
               f"({mesh.top_edges.size} on the top boundary) -> {path}")
    return EXIT_OK


def cmd_presets(args) -> int:
    for name in PRESET_NAMES:
        print(f"{name:20s} {PRESET_SUMMARY.get(name, '')}")
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seepflow",
                                     description="Richards' equation with seepage faces.")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_args(p):
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--preset", choices=PRESET_NAMES, help="named scenario")
        src.add_argument("--config", help="JSON scenario file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry, e.g. solver.max_iter=50 (repeatable)")
        p.add_argument("--out", help="output directory (meshgen: file or directory)")
        p.add_argument("--quiet", action="store_true", help="print errors only")

    p = sub.add_parser("run", help="run one scenario")
    scenario_args(p)
    p.add_argument("--no-timing", action="store_true",
                   help="omit wall times from the report (byte-reproducible output)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="compare both seepage schemes with the Neumann reference")
    scenario_args(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="penalty parameter sweep")
    scenario_args(p)
    p.add_argument("--param", choices=("gamma0", "gamma0_hyb"), required=True)
    p.add_argument("--values", required=True, help="comma separated positive values")
    p.add_argument("--baseline", choices=("neumann", "first"),
                   help="reference run (default: neumann for gamma0, first value for gamma0_hyb)")
    p.add_argument("--jobs", type=int, help="worker processes (default: one per value)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("meshgen", help="write the scenario mesh")
    scenario_args(p)
    p.set_defaults(func=cmd_meshgen)

    p = sub.add_parser("presets", help="list named scenarios")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.ERROR if getattr(args, "quiet", False) else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, MeshError, InputError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
