"""
Locating the seepage face on a two-plateau slope
================================================

The water table starts at the toe (z = 2 m) and heavy rain raises it. The
top boundary splits itself into edges where rain infiltrates and edges where
groundwater leaves the soil at zero head. The boundary table lists both
for each top edge.
"""

import logging

import numpy as np

from seepflow.io_output import boundary_table
from seepflow.scenario import preset, simulate

logging.basicConfig(level=logging.ERROR)

res = simulate(preset("slope_exitpoint"))
print(f"{res.mesh.n_cells} triangles, completed={res.completed}, "
      f"iterations/step={[r.iterations for r in res.reports]}")

for st in res.states:
    wet = np.count_nonzero(st.psi >= 0)
    print(f"t = {st.time / 3600:4.0f} h: {wet} of {res.mesh.n_cells} cells saturated")

# %%
# Columns: x, z, length, head, psi_trace, Q, q_n. Positive q_n is outflow.

tab = boundary_table(res.problem, res.final)
out = tab[:, 6] > 0
print(f"\noutflow on {np.count_nonzero(out)} of {len(tab)} top edges, "
      f"x from {tab[out, 0].min():.2f} to {tab[out, 0].max():.2f} m")
for row in tab[::6]:
    print("x={:5.2f} z={:4.2f} head={:9.2e} q_n={:10.3e}".format(row[0], row[1], row[3], row[6]))
