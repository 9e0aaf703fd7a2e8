"""Exception types shared across the package."""


class GmcrError(Exception):
    """Base class for all errors raised by this package."""


class InsufficientInputError(GmcrError):
    """Too few correspondences or measurements for the requested operation."""


class DegenerateGeometryError(GmcrError):
    """Input geometry does not constrain the estimate (collinear, coincident, zero-norm)."""


class InconsistentCliqueError(GmcrError):
    """A clique whose measurement intervals have empty intersection (malformed input)."""


class GraphSizeError(GmcrError):
    """Graph exceeds a hard size limit (brute-force solver guard)."""


class RegistrationFailureError(GmcrError):
    """The registration pipeline could not produce an estimate.

    Carries the name of the stage that failed ("scale", "consistency",
    "rotation", "translation", or "input").
    """

    def __init__(self, stage: str, message: str):
        super().__init__(f"registration failed at stage '{stage}': {message}")
        self.stage = stage


class ConfigError(GmcrError):
    """Invalid configuration value or malformed config file."""


class PlyError(GmcrError):
    """Base class for PLY parsing failures."""


class PlyHeaderError(PlyError):
    """Malformed PLY header."""

    def __init__(self, message: str, line: int):
        super().__init__(f"{message} (header line {line})")
        self.line = line


class PlyFormatError(PlyError):
    """Valid header but an unsupported PLY variant (e.g. big-endian)."""


class PlyBodyError(PlyError):
    """PLY body shorter or otherwise inconsistent with its header."""

    def __init__(self, message: str, where: str):
        super().__init__(f"{message} ({where})")
        self.where = where
