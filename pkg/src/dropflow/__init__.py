"""Gradient-flow simulation of a sessile drop's wetted set."""

from .shapes import RadialShape, star_radius, check_rho_reflection
from .field import drop_profile, energy, equilibrium_radius, rho_bound
from .velocity import VelocityLaw
from .flow import SchemeParams, run_flow, jko_step

__all__ = [
    "RadialShape", "star_radius", "check_rho_reflection", "drop_profile", "energy",
    "equilibrium_radius", "rho_bound", "VelocityLaw", "SchemeParams", "run_flow", "jko_step",
]
__version__ = "0.1.0"
