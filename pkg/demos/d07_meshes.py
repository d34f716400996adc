"""
Meshes: rectangles, profiles and the text format
================================================

Profile meshes are graded from a fine ground surface to a coarse bedrock.
Every mesh can be written to a small text format and read back unchanged,
which is how externally generated meshes enter the solver.
"""

import numpy as np

from seepflow import build_profile_mesh, build_rectangle_mesh, export_mesh, import_mesh
from seepflow.mesh import TAG_NAMES
from seepflow.scenario import NATURAL_BOTTOM, NATURAL_TOP, SLOPE_BOTTOM, SLOPE_TOP


def describe(label, mesh):
    tags, counts = np.unique(mesh.tags[mesh.boundary_edges], return_counts=True)
    sides = ", ".join(f"{TAG_NAMES[t]} {c}" for t, c in zip(tags, counts))
    print(f"{label}: {mesh.n_cells} triangles, {mesh.n_nodes} nodes, "
          f"area {mesh.areas.sum():.3f} m^2, boundary edges: {sides}")


describe("column", build_rectangle_mesh(0.1, 5.0, 0.05))
describe("slope 0.1/0.3", build_profile_mesh(SLOPE_TOP, SLOPE_BOTTOM, 0.1, 0.3))
describe("slope 0.05/0.3", build_profile_mesh(SLOPE_TOP, SLOPE_BOTTOM, 0.05, 0.3))
describe("hillside", build_profile_mesh(NATURAL_TOP, NATURAL_BOTTOM, 2.0, 4.0))

# %%
# Round trip through the text format.

mesh = build_profile_mesh(SLOPE_TOP, SLOPE_BOTTOM, 0.2, 0.4)
text = export_mesh(mesh)
print("\n".join(text.splitlines()[:4]), "\n...")
back = import_mesh(text)
assert np.array_equal(back.nodes, mesh.nodes)
assert np.array_equal(back.triangles, mesh.triangles)
print("round trip ok")
