"""Exception types raised across the package."""


class InvalidTableError(ValueError):
    """A contingency table or label input violates its invariants."""


class UndefinedMeasureError(ArithmeticError):
    """A measure cannot be evaluated on the given table.

    ``measure`` names the index that failed so batch drivers and the CLI
    can report it.
    """

    def __init__(self, measure, message):
        super().__init__(f"{measure}: {message}")
        self.measure = measure


class UnsupportedQError(ValueError):
    """The requested entropy order is not supported by an operation."""


class NumericalConsistencyError(ArithmeticError):
    """An internal cross-check failed beyond its rounding floor."""


class ConfigError(ValueError):
    """An experiment configuration is infeasible or malformed."""
