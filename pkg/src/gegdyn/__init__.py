"""Generalised extra-gradient (GEG) dynamics for min-max problems.

Iteration of the GEG map, Jacobian spectra and stability of its fixed
points, saddle-point verdicts, parameter certificates, basin sweeps and a
robust-ERM training driver.
"""

__version__ = "0.1.0"

from ._backend import NAME as BACKEND
from .calculus import GegConfig, OperatorBundle, Variant, make_operators
from .dynamics import IterationBudget, Status, Trace, iterate
from .problems import MinMaxProblem, builtin
from .spectral import Spectrum, Stability, classify, eigenvalues

__all__ = [
    "BACKEND",
    "GegConfig",
    "IterationBudget",
    "MinMaxProblem",
    "OperatorBundle",
    "Spectrum",
    "Stability",
    "Status",
    "Trace",
    "Variant",
    "builtin",
    "classify",
    "eigenvalues",
    "iterate",
    "make_operators",
]
