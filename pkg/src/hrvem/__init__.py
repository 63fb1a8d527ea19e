"""Mixed (Hellinger-Reissner) virtual elements for 3D linear elasticity."""

from .material import MaterialLaw
from .mesh import PolyMesh, generate, import_mesh, mesh_size, read_mesh, write_mesh
from .postprocess import postprocess
from .system import ALL_DIRICHLET, BoundaryConditions, Solution, solve, solution_distance
from .verify import case_a, case_b, compute_errors, convergence_rates, patch_case

__version__ = "0.1.0"

__all__ = [
    "ALL_DIRICHLET",
    "BoundaryConditions",
    "MaterialLaw",
    "PolyMesh",
    "Solution",
    "case_a",
    "case_b",
    "compute_errors",
    "convergence_rates",
    "generate",
    "import_mesh",
    "mesh_size",
    "patch_case",
    "postprocess",
    "read_mesh",
    "solution_distance",
    "solve",
    "write_mesh",
]
