"""Phase-field cohesive zone simulation of fracture and fatigue in
quasi-brittle materials (N / mm / MPa unit system)."""

from .constitutive import (DerivedCoefficients, MaterialParams, QuadPointState,
                           degradation, derive_coefficients, driving_force,
                           elastic_response, fatigue_degradation,
                           geometric_function, reference_cohesive_stress,
                           scaling_constant, update_fatigue, update_history)
from .generators import generate_bar_mesh, generate_senb_mesh, generate_tension3d_mesh
from .mesh import Mesh, MeshError, read_mesh, write_mesh
from .solver import (CtodCycle, CycleBlock, LoadProgram, RunLog, Simulation,
                     SolverSettings, measure_ultimate_force, run_program,
                     stepwise_blocks)

__all__ = [
    "CtodCycle", "CycleBlock", "DerivedCoefficients", "LoadProgram",
    "MaterialParams", "Mesh", "MeshError", "QuadPointState", "RunLog",
    "Simulation", "SolverSettings", "degradation", "derive_coefficients",
    "driving_force", "elastic_response", "fatigue_degradation",
    "generate_bar_mesh", "generate_senb_mesh", "generate_tension3d_mesh",
    "geometric_function", "measure_ultimate_force", "read_mesh",
    "reference_cohesive_stress", "run_program", "scaling_constant",
    "stepwise_blocks", "update_fatigue", "update_history", "write_mesh",
]

__version__ = "0.1.0"
