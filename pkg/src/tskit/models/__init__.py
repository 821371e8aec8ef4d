"""Built-in timesteppers: test fixtures and the cyclic-adsorption stand-in."""

from ._kernels import active_backend
from .adsorption import AdsorptionColumnModel
from .linear import LinearMapModel, QuadraticMapModel
from .oscillator import ForcedOscillatorModel

__all__ = [
    "AdsorptionColumnModel",
    "ForcedOscillatorModel",
    "LinearMapModel",
    "QuadraticMapModel",
    "active_backend",
]
