"""Exception hierarchy shared across the package."""


class SpillError(Exception):
    """Base class for all package errors."""

    module = "qvarspill"


class IngestError(SpillError):
    module = "timeseries"


class InsufficientDataError(SpillError):
    module = "timeseries"


class SingularDesignError(SpillError):
    module = "quantreg"

    def __init__(self, message, equation=None):
        super().__init__(message)
        self.equation = equation


class DegenerateVarianceError(SpillError):
    module = "fevd"


class AlignmentError(SpillError):
    module = "spillover"


class PlanError(SpillError):
    module = "rolling"


class RunError(SpillError):
    module = "rolling"


class DomainError(SpillError):
    module = "contagion"


class DonorPoolError(SpillError):
    module = "contagion"


class SpecError(SpillError):
    module = "dgp"


class ConfigError(SpillError):
    module = "cli"
