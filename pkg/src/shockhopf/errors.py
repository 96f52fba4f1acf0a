"""Exception hierarchy shared by all modules.

The CLI maps each family onto a distinct exit code, so new errors should
subclass one of the families below rather than ``ShockHopfError`` directly.
"""


class ShockHopfError(Exception):
    """Base class."""


class InvalidParameterError(ShockHopfError, ValueError):
    pass


class ConfigError(ShockHopfError):
    pass


# -- connection / degeneracy (exit code 2) ---------------------------------

class ConnectionFailure(ShockHopfError):
    """Family for failures to produce an admissible shock connection."""


class DegenerateShockError(ConnectionFailure):
    pass


class NonAdmissibleError(ConnectionFailure):
    pass


class NoConnectionError(ConnectionFailure):
    pass


class ResolutionError(ConnectionFailure):
    pass


# -- spectral evaluation (exit code 3) -------------------------------------

class ContourError(ShockHopfError):
    """Family for Evans-function evaluation and contour failures."""


class ConsistencyError(ContourError):
    """Spectral parameter lies on or inside the essential spectrum."""


class BranchAmbiguityError(ContourError):
    pass


class ContourResolutionError(ContourError):
    pass


class ContinuationError(ContourError):
    pass


# -- time integration (exit code 4) ----------------------------------------

class IntegrationFailure(ShockHopfError):
    pass


class StepRejectedError(IntegrationFailure):
    pass


class BlowupError(IntegrationFailure):
    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class WeightedOverflowError(IntegrationFailure):
    pass


# -- budget (exit code 5) --------------------------------------------------

class BudgetExceededError(ShockHopfError):
    pass


class DomainError(InvalidParameterError):
    pass
