"""Exception hierarchy shared by the library and the CLI."""


class SRGMMError(Exception):
    """Base class for all errors raised by srgmm."""


class InvalidArgumentError(SRGMMError, ValueError):
    """Raised on malformed or out-of-domain inputs."""


class DegeneratePriorError(InvalidArgumentError):
    """Raised when hyperparameters yield a degenerate prior (e.g. zero range)."""


class NumericalFailureError(SRGMMError, ArithmeticError):
    """Raised when a factorization or the sampler cannot proceed."""


class ResourceError(SRGMMError):
    """Raised when a requested dense result would exceed the configured size cap."""


class ParseError(InvalidArgumentError):
    """Raised on malformed input files; carries the offending location."""

    def __init__(self, message, path=None, line=None, column=None):
        loc = []
        if path is not None:
            loc.append(str(path))
        if line is not None:
            loc.append(f"line {line}")
        if column is not None:
            loc.append(f"column {column}")
        prefix = ":".join(loc[:1]) + (" (" + ", ".join(loc[1:]) + ")" if loc[1:] else "")
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.path = path
        self.line = line
        self.column = column
