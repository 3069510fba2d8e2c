"""Exception types shared across the package.

Invalid arguments raise the built-in ``ValueError``; the classes here cover
failure modes that callers are expected to catch and handle (budget
exhaustion, unsupported model shapes).
"""


class ResourceLimitError(RuntimeError):
    """An exact computation would exceed the configured operation budget."""


class PrecisionBudgetError(RuntimeError):
    """A fixed-point orbit was asked to run past its precision budget.

    Raised instead of silently rounding: an under-provisioned expanding-map
    orbit is not a simulation of the map.
    """


class UnsupportedConfigError(ValueError):
    """The model configuration does not match the shape an operation needs."""
