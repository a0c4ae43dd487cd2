"""Exception hierarchy."""


class LevyHomError(Exception):
    pass


class ValidationError(LevyHomError, ValueError):
    """A parameter or config violates a documented precondition."""


class UnsupportedDimension(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class ExponentOutOfRange(ValidationError):
    pass


class QuadratureFailure(LevyHomError):
    def __init__(self, message, outcome=None):
        super().__init__(message)
        self.outcome = outcome


class NotLevyMeasureError(LevyHomError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NormalizationMismatch(LevyHomError):
    pass


class TableBuildFailure(LevyHomError):
    pass
