"""Exception hierarchy shared by all modules.

The CLI maps these onto process exit codes: configuration problems exit
with 2, data problems with 3, numeric failures with 4.
"""


class PeptasteError(Exception):
    exit_code = 1


class ConfigError(PeptasteError):
    """Invalid user-supplied configuration (flags, patterns, parameters)."""

    exit_code = 2


class DataError(PeptasteError):
    """Invalid or insufficient input data."""

    exit_code = 3


class ParseError(DataError):
    """Malformed input file; message carries the offending line number."""


class ValidationError(DataError):
    """A domain invariant was violated (bad residue, bad label, bad shape)."""


class NumericError(PeptasteError):
    """Numerical failure during computation."""

    exit_code = 4


class TrainingDiverged(NumericError):
    """Training loss became NaN/inf; the loss history so far is attached."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []
