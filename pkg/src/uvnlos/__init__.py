"""Path loss models for short-range non-line-of-sight ultraviolet links."""

from .atmosphere import Atmosphere, phase_function
from .geometry import (DomainError, NoIntersectionError, Obstacle,
                       TransceiverGeometry, UnclassifiableError,
                       obstacle_vertices, ray_cone_roots)
from .mcpt import McptConfig, McptResult, estimate_pathloss, trace_photon
from .quadrature import QuadratureRule, legendre_rule, midpoint_rule
from .reflection import (PathLossResult, ReflectionParams, ReflectionSurface,
                         integrate_reflection, phong_intensity,
                         reflection_surfaces, reflection_weight,
                         total_pathloss)
from .scattering import ScatterIntegralConfig, ScatterResult, \
    integrate_scattering
from .scenario import (Scenario, ScenarioError, SweepSpec, apply_sweep_value,
                       load_scenario, parse_scenario, serialize_scenario)
from .simplified import (SamplingPlan, build_sampling_plan,
                         simplified_pathloss, subbeam_tau_limits)

__version__ = "0.1.0"

__all__ = [
    "Atmosphere", "phase_function",
    "DomainError", "NoIntersectionError", "UnclassifiableError",
    "Obstacle", "TransceiverGeometry", "obstacle_vertices", "ray_cone_roots",
    "McptConfig", "McptResult", "estimate_pathloss", "trace_photon",
    "QuadratureRule", "legendre_rule", "midpoint_rule",
    "PathLossResult", "ReflectionParams", "ReflectionSurface",
    "integrate_reflection", "phong_intensity", "reflection_surfaces",
    "reflection_weight", "total_pathloss",
    "ScatterIntegralConfig", "ScatterResult", "integrate_scattering",
    "Scenario", "ScenarioError", "SweepSpec", "apply_sweep_value",
    "load_scenario", "parse_scenario", "serialize_scenario",
    "SamplingPlan", "build_sampling_plan", "simplified_pathloss",
    "subbeam_tau_limits",
    "__version__",
]
