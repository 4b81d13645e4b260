"""Exception hierarchy.

Three branches matter operationally: ValidationError (caller handed us
something malformed), NumericError (the math itself is undefined or
degenerate for the given inputs), and IntegrityError (persisted state
cannot be trusted). The CLI maps these to exit codes 2, 3 and 4.
"""


class MomentflowError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(MomentflowError):
    """Malformed input: wrong shape, wrong kind, bad spec string, ..."""


class KindMismatch(ValidationError):
    """Two values of different element kinds (or dimensions) were combined."""


class EmptyBatch(ValidationError):
    """A batch must contain at least one record."""


class BadLadderSpec(ValidationError):
    """Order-ladder spec string or order set is invalid."""


class LadderMismatch(ValidationError):
    """Operation requires ladder orders the state does not carry."""


class LadderTooShort(ValidationError):
    """Metric truncation order exceeds the integer orders in the ladder."""


class OrderNotInLadder(ValidationError):
    """Queried moment order is neither 0, 1 nor a ladder order."""


class BadKindSpec(ValidationError):
    """Element-kind spec string is invalid."""


class BadProviderSpec(ValidationError):
    """Metric provider spec string is invalid."""


class BatchFormatError(ValidationError):
    """Batch CSV file does not match the declared element kind."""


class NumericError(MomentflowError):
    """The requested computation is numerically undefined or degenerate."""


class ZeroNormalizer(NumericError):
    """The weight sum vanished; every moment formula divides by it."""


class DomainError(NumericError):
    """A power or pole-sensitive operation left its numeric domain."""


class MaxOrderExceeded(NumericError):
    """Binomial coefficients are only kept exact up to order 62."""


class IntegrityError(MomentflowError):
    """Persisted state failed an integrity check."""


class DigestMismatch(IntegrityError):
    """State document content does not match its recorded digest."""


class LockHeld(IntegrityError):
    """Another writer holds the advisory lock on the state file."""


class TimingUnstable(MomentflowError):
    """Repeated timing runs of the same path disagreed by more than 50%."""


class AgreementError(MomentflowError):
    """The incremental and from-scratch paths disagreed numerically."""
