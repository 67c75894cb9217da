"""Ruin of a Cramer-Lundberg portfolio whose client base is an M/G/inf queue.

Large-deviation rate functions, ruin decay rates, most likely paths to ruin,
attribution of capital fluctuations, and a Monte Carlo simulator to check
them against.
"""

__version__ = "0.1.0"

from .distributions import Deterministic, Distribution, Excess, Exponential, Gamma, Uniform
from .model import (
    DomainError,
    ModelParams,
    fluid_claims,
    fluid_population,
    load_config,
    log_phi,
    net_profit_holds,
    phi,
)

__all__ = [
    "Deterministic",
    "Distribution",
    "DomainError",
    "Excess",
    "Exponential",
    "Gamma",
    "ModelParams",
    "Uniform",
    "fluid_claims",
    "fluid_population",
    "load_config",
    "log_phi",
    "net_profit_holds",
    "phi",
]
