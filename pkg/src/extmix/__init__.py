"""Bayesian multivariate extreme value mixtures.

A Gaussian bulk below a threshold vector is joined to a multivariate
generalized Pareto tail above it; the threshold is estimated together with
the other parameters by MCMC.
"""

from .exceptions import (DegenerateConfigurationError, InitializationError,
                         InsufficientTailError, LoadError, NumericPathologyError,
                         RankDeficiencyError, SupportError, UsageError)
from .mgpd import TailParams
from .model import Dataset, ModelParams, PriorSpec, scenario_params, simulate_model
from .stats_kernels import CholCorr, MvnParams

__version__ = "0.1.0"

__all__ = [
    "DegenerateConfigurationError", "InitializationError", "InsufficientTailError",
    "LoadError", "NumericPathologyError", "RankDeficiencyError", "SupportError", "UsageError",
    "TailParams", "Dataset", "ModelParams", "PriorSpec", "scenario_params", "simulate_model",
    "CholCorr", "MvnParams", "__version__",
]
