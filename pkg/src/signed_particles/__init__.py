"""Signed-particle Monte Carlo simulation of time-dependent quantum systems."""

from .errors import (
    ConfigurationError,
    DomainExit,
    NumericError,
    ParticleCapExceeded,
)
from .phase_space import (
    ELECTRON,
    GENERIC,
    PROTON,
    Ensemble,
    PhaseSpaceGrid,
    RandomStream,
    SignedParticle,
    Species,
    cell_index,
    momentum_lattice,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DomainExit",
    "NumericError",
    "ParticleCapExceeded",
    "ELECTRON",
    "GENERIC",
    "PROTON",
    "Ensemble",
    "PhaseSpaceGrid",
    "RandomStream",
    "SignedParticle",
    "Species",
    "cell_index",
    "momentum_lattice",
]
