"""Exception and warning types shared across the toolkit."""


class ImbkitError(Exception):
    """Base class for all toolkit errors."""


# --- dataset ingestion -------------------------------------------------

class MissingFileError(ImbkitError):
    pass


class MissingColumnError(ImbkitError):
    pass


class NotBinaryError(ImbkitError):
    """Label column does not resolve to exactly two classes."""


class EmptyDatasetError(ImbkitError):
    pass


class InsufficientClassSamplesError(ImbkitError):
    """A sampling request asked for more rows of a class than exist.

    Carries which class fell short and how many rows were available.
    """

    def __init__(self, label, requested, available):
        self.label = label
        self.requested = requested
        self.available = available
        super().__init__(
            f"class {label}: requested {requested} rows, only {available} available"
        )


# --- sampling -----------------------------------------------------------

class TargetExceedsAvailableError(ImbkitError):
    pass


class TooFewMinoritySamplesError(ImbkitError):
    pass


# --- classification -----------------------------------------------------

class DimensionMismatchError(ImbkitError):
    pass


class BackendFailureError(ImbkitError):
    """External scoring backend crashed or violated the wire protocol."""

    def __init__(self, message, diagnostics=""):
        self.diagnostics = diagnostics
        if diagnostics:
            message = f"{message}\n--- backend diagnostics ---\n{diagnostics}"
        super().__init__(message)


# --- decisions and metrics ----------------------------------------------

class PriorOutOfRangeError(ImbkitError):
    pass


class DegenerateCostsError(ImbkitError):
    pass


class LengthMismatchError(ImbkitError):
    pass


class MissingClassError(ImbkitError):
    pass


class BinMismatchError(ImbkitError):
    pass


class EmptyInputError(ImbkitError):
    pass


# --- experiment ----------------------------------------------------------

class ConfigInvalidError(ImbkitError):
    pass


# --- warnings -------------------------------------------------------------

class AlreadyBalancedWarning(UserWarning):
    """Balancing was requested on a context that is not majority-heavy."""


class DegenerateContextWarning(UserWarning):
    """All context rows identical; a fallback bandwidth was used."""
