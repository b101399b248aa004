"""Exception hierarchy shared by every stage of the detector."""


class WhistlerError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgument(WhistlerError, ValueError):
    pass


class DomainError(InvalidArgument):
    """Dispersion formula evaluated outside its valid domain."""


class DegenerateRow(InvalidArgument):
    """A spectrogram row has zero variance and cannot be normalised."""


class ShapeMismatch(InvalidArgument):
    pass


class WindowTooLarge(InvalidArgument):
    """The CFAR window does not fit inside the series."""


class StageError(WhistlerError):
    """Wraps an upstream failure with the pipeline stage it happened in."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")
