"""2D electrostatic field models of the beam/counter-electrode gap.

Three routes produce the surface traction that loads the beam: an analytic
parallel-plate pressure, a boundary-integral solver on the conductor
outlines, and a domain solver on a triangulated dielectric region with a
truncated outer boundary. All of them work on the :class:`FieldDomain`
geometry built from a specimen and a beam displacement.
"""

from .domain import (
    Drive,
    FieldDomain,
    build_field_domain,
    build_width_plane_domain,
)
from .solution import (
    EPS0,
    FieldMethod,
    FieldSolution,
    capacitance,
    parallel_plate_pressure,
    parallel_plate_solution,
    surface_traction,
    traction_load_state,
)
from .bem import bem_solve
from .fem import FieldMesh, build_reference_mesh, fem_solve, morph_mesh
from .correction import (
    CorrectionFactors,
    CorrectionScenario,
    calibrate_correction,
    correction_factors,
    scenario_catalog,
)

__all__ = [
    "EPS0", "Drive", "FieldDomain", "FieldMethod", "FieldSolution",
    "FieldMesh", "CorrectionFactors", "CorrectionScenario",
    "build_field_domain", "build_width_plane_domain", "build_reference_mesh",
    "bem_solve", "fem_solve", "morph_mesh", "capacitance",
    "parallel_plate_pressure", "parallel_plate_solution", "surface_traction",
    "traction_load_state", "calibrate_correction", "correction_factors",
    "scenario_catalog",
]
