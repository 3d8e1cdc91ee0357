"""Numerical laboratory for curvature flow with logarithmically augmented speed.

Simulates closed convex surfaces of revolution moving with normal
velocity H * ln(H + h0)^alpha, verifies the evolution identities and
preserved pinching quantities along the runs, and analyzes the
finite-time curvature blowup (classification, rescaling, sphericity of
the rescaled limit).
"""

from .speed import SpeedParams
from .geometry import AxiSurface, CurvatureField, SphereState, curvatures
from .flow import FlowConfig, FlowResult, FlowTrace, run, step
from .oracle import SphereSolution, solve_sphere
from .pinching import PinchingConstants, auto_constants, sigma_max
from .singularity import BlowupScale, SingularityReport, analyze

__version__ = "0.1.0"

__all__ = [
    "SpeedParams",
    "AxiSurface",
    "CurvatureField",
    "SphereState",
    "curvatures",
    "FlowConfig",
    "FlowResult",
    "FlowTrace",
    "run",
    "step",
    "SphereSolution",
    "solve_sphere",
    "PinchingConstants",
    "auto_constants",
    "sigma_max",
    "BlowupScale",
    "SingularityReport",
    "analyze",
    "__version__",
]
