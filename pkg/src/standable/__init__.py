"""standable: make triangle meshes self-supporting.

A differentiable rigid-body simulator with penalty-based frictional
contact, gradient-based vertex optimization against standability and
stable-equilibrium objectives, and certification protocols (time-averaged
rotation deviation, perturbation battery, non-flat platforms, cut-plane
baseline).
"""

from .evaluate import (
    EvalReport,
    battery_sweep,
    certify,
    cut_plane,
    perturbation_battery,
    platform_test,
    trd,
)
from .fixtures import FIXTURE_NAMES, make_fixture
from .gradsim import (
    Tape,
    TrajectoryCotangent,
    checkpointed_grad,
    finite_difference_check,
    grad_through_sim,
    rotation_deviation_functional,
)
from .losses import (
    LossWeights,
    TiltProbe,
    bottom_laplacian_loss,
    com_height_after_tilt,
    fidelity_loss,
    normal_consistency_loss,
    stable_equilibrium_loss,
    stand_loss,
    total_loss,
)
from .mass import MassProperties, compute_mass_properties, mass_properties_gradient
from .mesh import (
    BottomVertexSet,
    MeshError,
    MeshValidation,
    TriMesh,
    ground_and_center,
    load_obj,
    save_obj,
)
from .optimize import OptimizerConfig, RunHistory, optimize
from .platforms import Platform, platform_sdf, settle_translation
from .simulation import (
    RigidState,
    SimParams,
    SimulationError,
    Trajectory,
    build_body,
    contact_force,
    simulate,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "BottomVertexSet", "EvalReport", "FIXTURE_NAMES", "LossWeights",
    "MassProperties", "MeshError", "MeshValidation", "OptimizerConfig",
    "Platform", "RigidState", "RunHistory", "SimParams", "SimulationError",
    "Tape", "TiltProbe", "Trajectory", "TrajectoryCotangent", "TriMesh",
    "battery_sweep", "bottom_laplacian_loss", "build_body", "certify",
    "checkpointed_grad", "com_height_after_tilt", "compute_mass_properties",
    "contact_force", "cut_plane", "fidelity_loss", "finite_difference_check",
    "grad_through_sim", "ground_and_center", "load_obj", "make_fixture",
    "mass_properties_gradient", "normal_consistency_loss", "optimize",
    "perturbation_battery", "platform_sdf", "platform_test",
    "rotation_deviation_functional", "save_obj", "settle_translation",
    "simulate", "stable_equilibrium_loss", "stand_loss", "step",
    "total_loss", "trd",
]
