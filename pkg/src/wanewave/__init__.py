"""Stability switches and attractors of an SIRS model with waning and boosting of immunity."""

__version__ = "0.1.0"

from .errors import WanewaveError
from .model import Equilibrium, HistoryFunction, ModelParams, basic_reproduction_number, endemic_equilibrium

__all__ = [
    "Equilibrium",
    "HistoryFunction",
    "ModelParams",
    "WanewaveError",
    "basic_reproduction_number",
    "endemic_equilibrium",
]
