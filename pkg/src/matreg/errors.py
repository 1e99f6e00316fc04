"""Exception types raised across the package."""


class MatregError(Exception):
    """Base class for all package errors."""


class ContractViolation(MatregError, ValueError):
    """An input violated a documented precondition."""


class DimensionMismatch(ContractViolation):
    pass


class DimensionTooLarge(ContractViolation):
    pass


class MatrixParseError(MatregError, ValueError):
    """Raised by the matrix readers; carries a location in the message."""


class BandFailure(MatregError):
    """A regularization stage could not fit its removals in the size budget.

    The probabilistic guarantees behind each stage can fail on a given sample.
    This is an expected outcome, so the exception carries enough data for the
    caller to record it instead of aborting a sweep.
    """

    def __init__(self, stage, message, counts=None, mask=None):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.counts = dict(counts or {})
        # the oversized mask the stage would have returned
        self.mask = mask
