"""Mixed finite element simulation of Richards' equation with seepage faces."""

from .constitutive import (DomainError, MaterialParams, SOIL_PRESETS, soil, theta_hat,
                           water_content, permeability, inv_permeability,
                           d_water_content, d_inv_permeability, lscheme_bound)
from .mesh import (TriMesh, BoundaryClassifier, build_rectangle_mesh, build_profile_mesh,
                   export_mesh, import_mesh)
from .seepage import (SolverSettings, FieldState, StepReport, BoundaryConditions,
                      RichardsProblem, ConvergenceError, step)

__version__ = "0.1.0"
