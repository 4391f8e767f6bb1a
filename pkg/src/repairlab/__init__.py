"""Exact and approximate constraint-repair operators for autoregressive forecasting."""

__version__ = "0.1.0"

from .fields import NormFrame, discrete_divergence, divergence_rms, energy, mse
from .operators import CleanupSpec, SpecError, parse_operator
from .spectral import hodge_project

__all__ = ["CleanupSpec", "NormFrame", "SpecError", "__version__", "discrete_divergence",
           "divergence_rms", "energy", "hodge_project", "mse", "parse_operator"]
