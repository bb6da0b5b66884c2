"""Exception and warning types shared across the package."""


class DemandScopeError(Exception):
    """Base class for all package errors."""


class ValidationError(DemandScopeError, ValueError):
    """Bad input data or configuration (CLI exit code 2)."""


# data pipeline
class NoStableBills(ValidationError):
    pass


class NoEligibleImage(ValidationError):
    pass


class OutOfBounds(ValidationError):
    pass


class TooFewSamples(ValidationError):
    pass


class MissingCell(ValidationError):
    pass


class UnknownWard(ValidationError):
    pass


class RecordError(ValidationError):
    """A malformed row in an input table; message carries the line number."""


# network engine
class ShapeMismatch(ValidationError):
    pass


class NonFiniteGradient(DemandScopeError, FloatingPointError):
    pass


class Divergence(DemandScopeError, FloatingPointError):
    """Training loss became non-finite."""


class InvalidConfig(ValidationError):
    pass


class EmptyMask(DemandScopeError):
    """Pointer segmentation found no pixel above threshold."""


# baselines / evaluation
class NoHistory(DemandScopeError, LookupError):
    pass


class SingleClassSet(DemandScopeError):
    pass


class ZeroVariance(DemandScopeError, ValueError):
    pass


class TooFewCounties(ValidationError):
    pass


class ClampWarning(RuntimeWarning):
    """A probability was clamped before taking its log."""


class DegenerateFeature(RuntimeWarning):
    """A training-set standard deviation was zero and replaced by one."""


class CensusGroupWarning(UserWarning):
    """A census indicator group does not sum to one."""
