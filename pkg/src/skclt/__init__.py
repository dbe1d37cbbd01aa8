"""Fluctuations of the SK energy density at high temperature.

Closed-form replica-symmetric theory (:mod:`skclt.theory`), an exact
enumeration oracle for small systems (:mod:`skclt.gibbs_exact`), a seeded
Metropolis engine over disorder ensembles (:mod:`skclt.mc`), distributional
diagnostics (:mod:`skclt.stats`) and the batch experiments behind the CLI
(:mod:`skclt.experiments`).
"""

from skclt.errors import ConvergenceError, EnumerationCapError, RegimeError
from skclt.params import ModelParams

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "EnumerationCapError",
    "ModelParams",
    "RegimeError",
    "__version__",
]
