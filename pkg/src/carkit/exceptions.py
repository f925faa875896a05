

class CarkitError(Exception):
    """Base class for every error raised by carkit.
    """


class DecorationError(CarkitError, TypeError):
    """A validation decorator was applied to an invalid target.
    """


class ValidationError(CarkitError, ValueError):
    """A validation condition was not met.
    """


# =======================================================
class ExpressionError(ValidationError):
    """There was a problem evaluating an expression.
    """


# =======================================================
class NonPositiveMin(ValidationError):
    """The minimum depth of a logarithmic table is not positive.
    """

class BadRange(ValidationError):
    """The depth range is empty or inverted.
    """

class ZeroBins(ValidationError):
    """A table was requested with no bins.
    """

class DegenerateWidths(ValidationError):
    """Bin widths cannot be normalized.
    """

class NonPositiveDepth(ValidationError):
    """A valid depth is zero or negative.
    """

class NonFinite(ValidationError):
    """An input contains NaN or infinity.
    """

class ShapeMismatch(ValidationError):
    """Array shapes do not agree.
    """

class TargetOutOfRange(ValidationError):
    """A target entry lies outside [0, 1].
    """

class OddChannels(ValidationError):
    """The ordinal head needs an even channel count.
    """

class SemanticsMismatch(ValidationError):
    """Probabilities or tables have the wrong semantics for an operation.
    """

class TooFewMembers(ValidationError):
    """An ensemble needs at least two members.
    """

class MaskMismatch(ValidationError):
    """Validity masks of combined maps differ.
    """

class EmptyMask(ValidationError):
    """No valid pixels remain.
    """

class BadConfig(ValidationError):
    """A configuration value is invalid.
    """


# =======================================================
class ArrayFormatError(CarkitError, OSError):
    """An array file cannot be parsed.
    """

class BadMagic(ArrayFormatError):
    """The file does not start with the ``.npy`` magic string.
    """

class UnsupportedDtype(ArrayFormatError):
    """The file holds a dtype, byte order or layout carkit does not read.
    """


# =======================================================
class TrainingError(CarkitError, RuntimeError):
    """A benchmark training run could not complete.
    """

class DivergedLoss(TrainingError):
    """The training loss became non-finite.
    """
