"""Conjugate points of Jacobi-Maupertuis geodesics near the Hill boundary."""
from importlib.resources import files

from hillscope.core import (
    ConfigError,
    DomainError,
    HillKind,
    MechanicalSystem,
    PolynomialPotential,
    State,
    hill_classify,
    jm_length,
    load_scenario,
)

__all__ = [
    "ConfigError", "DomainError", "HillKind", "MechanicalSystem", "PolynomialPotential", "State",
    "hill_classify", "jm_length", "load_scenario", "scenario_path",
]


def scenario_path(name: str):
    """Path of a bundled scenario (``model``, ``oscillator``, ``perturbed_model``)."""
    return files("hillscope") / "scenarios" / f"{name}.json"
