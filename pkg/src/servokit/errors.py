"""Exception hierarchy shared across the package.

CLI exit-code contract: ParseError -> 2, ValidationError -> 3, any other
ServokitError raised while running a stage -> 4.
"""


class ServokitError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(ServokitError):
    """Input file is missing or not syntactically valid."""


class ValidationError(ServokitError):
    """Input parsed but violates a schema or domain invariant."""


class UnknownAccelError(ServokitError):
    """Acceleration register has no calibrated inrush entry."""


class CalibrationError(ServokitError):
    """Inrush calibration rows are inconsistent (e.g. negative solved D)."""


class InfeasibleFuseError(ServokitError):
    """Even zero torque exceeds the port budget."""

    def __init__(self, message: str, min_load_a: float):
        super().__init__(message)
        self.min_load_a = min_load_a


class SingularChainError(ServokitError):
    """Differential IK requested with zero damping on a rank-deficient Jacobian."""


class PerceptionError(ServokitError):
    """Base class for perception pipeline failures."""


class UnknownLabelError(PerceptionError):
    """Requested label has no configured HSV range."""


class TargetNotFoundError(PerceptionError):
    """No component of the requested label meets the minimum area."""


class NoDepthError(PerceptionError):
    """Component has no pixel with valid depth."""


class StageError(ServokitError):
    """A pipeline stage failed; message is prefixed with the stage name."""

    def __init__(self, stage: str, cause: Exception | str):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
