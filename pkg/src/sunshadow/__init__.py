"""Sun-shadow hybrid dynamics: Kepler flow inside the Earth-shadow strip,
Stark flow outside, in parabolic canonical coordinates."""

__version__ = "0.1.0"

from .core import (
    CartesianState,
    IntegralSet,
    ParabolicState,
    integrals,
    to_cartesian,
    to_parabolic,
)
from .params import PhysParams, MU_EARTH, R_EARTH, F_SRP_DEFAULT

__all__ = [
    "CartesianState",
    "IntegralSet",
    "ParabolicState",
    "PhysParams",
    "MU_EARTH",
    "R_EARTH",
    "F_SRP_DEFAULT",
    "integrals",
    "to_cartesian",
    "to_parabolic",
    "__version__",
]
