"""tentkit: spacetime tent-pitching solvers for hyperbolic systems.

A spatial mesh is advanced in time through tent-shaped spacetime regions;
each tent is mapped to a space x (0,1) cylinder where ordinary spatial
discretizations and time steppers apply.  The package provides the tent
meshing machinery, the mapping algebra, a locally implicit mixed-FEM
solver for the acoustic wave system, and a fully explicit DG solver with
entropy-viscosity shock capturing for nonlinear conservation laws.
"""

from .errors import (
    CausalityViolation,
    EmptyReadySet,
    InvariantViolation,
    MeshFormatError,
    NonFiniteState,
    NonPhysicalState,
    SingularStageMatrix,
    StalledFront,
    TentkitError,
)
from .mesh import (
    SpatialMesh,
    VertexPatch,
    generate_step_channel,
    generate_structured_square,
    load_mesh,
    mesh_quality,
    save_mesh,
    vertex_patch,
)

__all__ = [
    "CausalityViolation",
    "EmptyReadySet",
    "InvariantViolation",
    "MeshFormatError",
    "NonFiniteState",
    "NonPhysicalState",
    "SingularStageMatrix",
    "StalledFront",
    "TentkitError",
    "SpatialMesh",
    "VertexPatch",
    "generate_step_channel",
    "generate_structured_square",
    "load_mesh",
    "mesh_quality",
    "save_mesh",
    "vertex_patch",
]

__version__ = "0.1.0"
