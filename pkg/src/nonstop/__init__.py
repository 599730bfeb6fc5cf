"""Periodic non-stop trajectories for aerial carriers holding a cable-suspended load."""
from ._kernels import BACKEND
from .connect import LambdaPath, PlanningFailed, plan_path, segment_clearance
from .geometry import (
    AttachmentLayout,
    BearingTension,
    DegenerateLayout,
    ForceConfig,
    GraspModel,
    LambdaPoint,
    NotWrenchConsistent,
    Wrench,
    ZeroForce,
    bearing_differential,
    bearing_tension,
    build_grasp_model,
    check_layout_assumption,
    forces_from_lambda,
    gravity_wrench,
    is_admissible,
    lambda_from_forces,
)
from .orbit import LinearOrbit, OrbitReport, eval_orbit, orbit_to_kinematics, sample_orbit_matrix, verify_orbit
from .sim import (
    CableParams,
    CarrierParams,
    LoadState,
    NumericalDivergence,
    SimWorld,
    TimeSeries,
    cable_force,
    run_scenario,
    step,
)

__all__ = [
    "BACKEND", "LambdaPath", "PlanningFailed", "plan_path", "segment_clearance", "AttachmentLayout",
    "BearingTension", "DegenerateLayout", "ForceConfig", "GraspModel", "LambdaPoint",
    "NotWrenchConsistent", "Wrench", "ZeroForce", "bearing_differential", "bearing_tension",
    "build_grasp_model", "check_layout_assumption", "forces_from_lambda", "gravity_wrench",
    "is_admissible", "lambda_from_forces", "LinearOrbit", "OrbitReport", "eval_orbit",
    "orbit_to_kinematics", "sample_orbit_matrix", "verify_orbit", "CableParams", "CarrierParams",
    "LoadState", "NumericalDivergence", "SimWorld", "TimeSeries", "cable_force", "run_scenario",
    "step",
]

__version__ = "0.1.0"
