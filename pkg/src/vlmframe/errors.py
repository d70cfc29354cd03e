"""Exception hierarchy shared by the pipeline stages."""


class VLMError(Exception):
    """Base class for all errors raised by vlmframe."""


class ParseError(VLMError, ValueError):
    """Malformed input text. ``line`` is the 1-based data row, when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"row {line}: {message}"
        super().__init__(message)


class FieldValidationError(VLMError, ValueError):
    """A domain object violates one of its invariants."""


class EmptyOverlapError(VLMError):
    """No pixel of the field could be resolved on the global grid."""


class AlignmentError(VLMError, ValueError):
    """Two per-pixel sequences do not refer to the same pixels."""


class RankDeficientError(VLMError):
    """The polynomial design matrix is numerically singular."""


class EmptyCollocationError(VLMError):
    """No GNSS station has any pixel inside the collocation radius."""


class DegenerateExtentError(VLMError):
    """A point field spans too little area to be gridded."""


class EmptySpectrumError(VLMError):
    """A spectrum has no positive power to normalise by."""
