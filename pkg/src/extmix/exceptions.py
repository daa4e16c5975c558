"""Exception types raised across the package."""


class UsageError(ValueError):
    """Invalid arguments: bad shapes, out-of-range hyperparameters, empty inputs."""


class SupportError(ValueError):
    """A point lies outside the support of a distribution where a finite value is required."""


class DegenerateConfigurationError(RuntimeError):
    """Parameters make a sampling routine numerically infeasible."""


class InitializationError(RuntimeError):
    """No starting point with a finite log-posterior could be found."""


class NumericPathologyError(RuntimeError):
    """A sampler hit a numerical failure it cannot recover from."""


class InsufficientTailError(ValueError):
    """Too few observations beyond a requested tail level."""


class LoadError(ValueError):
    """A data file could not be parsed."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class RankDeficiencyError(ValueError):
    """A regression design matrix is not of full column rank."""
