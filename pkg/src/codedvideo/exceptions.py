"""Exception hierarchy shared by all modules."""


class CodedVideoError(Exception):
    """Base class for every error raised by this package."""


class ParamError(CodedVideoError, ValueError):
    """Invalid parameter or inconsistent array dimensions."""


class IngestError(CodedVideoError):
    """Frame directory could not be ingested."""


class FormatError(CodedVideoError, ValueError):
    """Malformed tensor file."""


class IoError(CodedVideoError, OSError):
    """Output location cannot be written."""


class SelectionError(CodedVideoError, ValueError):
    """Requested training-block selection is infeasible."""
