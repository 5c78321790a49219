"""Exception types shared across the package."""


class DuoIrsError(Exception):
    """Base class for all package errors."""


class ConfigError(DuoIrsError, ValueError):
    """Invalid argument or scenario configuration."""


class InsufficientPilotsError(ConfigError):
    """Pilot count below the least-squares identifiability bound."""


class UnsupportedConfigurationError(ConfigError):
    """Requested operation is only defined for a restricted configuration."""


class DegenerateChannelError(DuoIrsError):
    """A channel draw has entries too close to zero to serve as a reference
    for the scaling-vector identities (division would blow up)."""


class RankDeficiencyError(DuoIrsError):
    """A design/observation matrix does not meet its rank precondition."""

    def __init__(self, message, rank=None, required=None):
        super().__init__(message)
        self.rank = rank
        self.required = required


class CaseMismatchError(RankDeficiencyError):
    """The tall-matrix (case 1) estimator was invoked where only the
    vectorized (case 2) estimator is identifiable."""


class DesignFailureError(DuoIrsError):
    """Randomized schedule search exhausted its retries without producing a
    full-rank certified design."""

    def __init__(self, message, last_rank=None, required=None):
        super().__init__(message)
        self.last_rank = last_rank
        self.required = required
