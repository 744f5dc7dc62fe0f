"""Exception hierarchy shared by every module."""


class GroundingError(ValueError):
    """Base class for all errors raised by this package."""


class FormatError(GroundingError):
    """Malformed input file. Carries the path and line number when known."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


class DimensionMismatch(GroundingError):
    pass


class DuplicateKey(GroundingError):
    pass


class OutOfVocabulary(GroundingError, KeyError):
    def __str__(self):
        return ValueError.__str__(self)


class NoUsableLabels(GroundingError):
    """None of the labels of an image could be looked up."""


class SingularSystem(GroundingError):
    pass


class ConvergenceError(GroundingError):
    pass


class SeparationError(ConvergenceError):
    pass


class ValidationError(GroundingError):
    """Configuration or CLI input rejected before any work started."""
