"""Exception hierarchy.

Every failure the library can signal derives from :class:`GrushinError` so the
CLI can map it to an exit code without catching unrelated bugs.
"""


class GrushinError(Exception):
    pass


# domain / grid
class DomainError(GrushinError, ValueError):
    pass


class DomainSplit(DomainError):
    pass


class BadExtent(DomainError):
    pass


class BadDimension(DomainError):
    pass


class BadGamma(DomainError):
    pass


class NonFinite(GrushinError, FloatingPointError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class DimensionMismatch(GrushinError, ValueError):
    pass


# spectral
class NotConverged(GrushinError, RuntimeError):
    pass


class NotPositiveDefinite(GrushinError, ValueError):
    pass


class ZeroField(GrushinError, ValueError):
    pass


class PoincareViolated(GrushinError, AssertionError):
    def __init__(self, message, seed, trial, quotient):
        super().__init__(message)
        self.seed = seed
        self.trial = trial
        self.quotient = quotient


# source model / hypotheses
class ParamViolation(GrushinError, ValueError):
    pass


class NonPositiveJ0(GrushinError, ValueError):
    pass


class NonPositiveSigma(GrushinError, ValueError):
    pass


# solver
class InvalidInitialData(GrushinError, ValueError):
    pass


class PositivityViolated(GrushinError, RuntimeError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


# diagnostics
class IncompatibleTrace(GrushinError, ValueError):
    pass


# configuration
class SchemaError(GrushinError, ValueError):
    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class ValidationError(GrushinError, ValueError):
    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
