"""Exception taxonomy shared across the package.

Every error raised by library code derives from SpinHtmError so callers
(and the CLI) can map failures to a machine-parsable category.
"""


class SpinHtmError(Exception):
    """Base class for all spinhtm errors."""

    category = "error"


class IdxFormatError(SpinHtmError):
    """Malformed IDX byte stream."""

    category = "idx-format"


class BadMagic(IdxFormatError):
    category = "idx-bad-magic"


class TruncatedFile(IdxFormatError):
    category = "idx-truncated"


class DimensionOverflow(IdxFormatError):
    category = "idx-dimension-overflow"


class LengthMismatch(SpinHtmError):
    category = "length-mismatch"


class IndexOutOfRange(SpinHtmError):
    category = "index-out-of-range"


class EmptyPool(SpinHtmError):
    category = "empty-pool"


class NotOutputNode(SpinHtmError):
    category = "not-output-node"


class ArityMismatch(SpinHtmError):
    category = "arity-mismatch"


class UntrainedChild(SpinHtmError):
    category = "untrained-child"


class UntrainedNetwork(SpinHtmError):
    category = "untrained-network"


class TopologyMismatch(SpinHtmError):
    category = "topology-mismatch"


class NegativeWeight(SpinHtmError):
    category = "negative-weight"


class SingularSystem(SpinHtmError):
    category = "singular-system"


class TooFewColumns(SpinHtmError):
    category = "too-few-columns"


class CursorOverrun(SpinHtmError):
    category = "cursor-overrun"


class MissingActivity(SpinHtmError):
    category = "missing-activity"


class UnknownAxis(SpinHtmError):
    category = "unknown-axis"


class ConfigError(SpinHtmError):
    category = "config"
