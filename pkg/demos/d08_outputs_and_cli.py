"""
Writing results and driving runs from the command line
======================================================

A run can emit a VTK time series, vertical profiles, top-boundary tables and
a JSON report. The ``seepflow`` command wraps the same machinery; here it is
called in-process through :func:`seepflow.cli.main`.
"""

import logging
import tempfile
from dataclasses import replace
from pathlib import Path

from seepflow.cli import main
from seepflow.io_output import OutputRequest, OutputWriter, read_report, read_vtk_cell_data
from seepflow.scenario import preset, simulate

logging.basicConfig(level=logging.ERROR)
out = Path(tempfile.mkdtemp(prefix="seepflow_demo_"))

cfg = preset("rect_1")
cfg = replace(cfg, t_final=4 * cfg.dt)
res = simulate(cfg)
requests = (OutputRequest("vtk_series", 2, "col"),
            OutputRequest("profile_csv", 1, "col", x=0.05),
            OutputRequest("boundary_csv", 4, "top"),
            OutputRequest("report_json", 1, "col"))
files = OutputWriter.for_result(res, requests, out / "api", include_timing=False)
for f in files:
    print(f.relative_to(out))

vtk = read_vtk_cell_data(next(f for f in files if f.suffix == ".vtk"))
print("VTK cell fields:", sorted(k for k in vtk if k not in ("points", "cells", "cell_types")))
print("report:", [(r.iterations, r.converged) for r in read_report(out / "api" / "col.json")])

# %%
# The same scenario from the command line, with an override.

code = main(["run", "--preset", "rect_1", "--set", "t_final_hours=10",
             "--out", str(out / "cli"), "--no-timing"])
print("exit code", code)
print(sorted(p.name for p in (out / "cli").iterdir()))
