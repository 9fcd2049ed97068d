"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: UsageError -> 1, DataError (and
ParseError) -> 2, ShapeError / NumericError -> 3.
"""


class MorphjointError(Exception):
    """Base class for all toolkit errors."""


class UsageError(MorphjointError):
    """Bad command line, unknown config key, missing required argument."""


class DataError(MorphjointError):
    """Input data violates a documented file contract."""


class ParseError(DataError):
    """Malformed line in a corpus, dictionary, embedding or rule file."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
        if line is not None:
            prefix += f"{line}:"
        if prefix:
            prefix += " "
        super().__init__(prefix + message)


class ShapeError(MorphjointError):
    """Tensor shape inconsistent with the operation's contract."""


class NumericError(MorphjointError):
    """Non-finite value where the numeric contract forbids one."""
