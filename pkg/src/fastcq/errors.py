"""Exception types shared across the package."""


class FastCQError(Exception):
    """Base class for all package errors."""


class ConfigurationError(FastCQError):
    """Invalid parameters, kernel metadata, or run configuration."""


class OrderingError(FastCQError):
    """Time points supplied out of order (grid must be strictly increasing)."""


class StepScaleError(FastCQError):
    """A step or distance falls outside every approximation interval."""


class HorizonExceededError(StepScaleError):
    """The run advanced past the coverage of the allocated level stack.

    Levels integrate history from t=0; a level allocated mid-run cannot
    recover samples that were already forgotten, so the stack is sized
    from the configured horizon and cannot grow afterwards.
    """


class ControllerFailureError(FastCQError):
    """Step-size controller could not produce a usable step (stiffness,
    blow-up, or nonpositive step density)."""


class NumericalFailureError(FastCQError):
    """An inner solve (Newton iteration, factorization) failed to converge."""
