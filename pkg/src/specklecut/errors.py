"""Exception types shared across the package.

Every error raised by specklecut derives from SpeckleCutError so callers
(and the CLI) can catch one base class.
"""


class SpeckleCutError(Exception):
    pass


# --- tensor / network math ---

class ShapeMismatch(SpeckleCutError):
    pass


class NonPositiveOutput(SpeckleCutError):
    pass


class NonFiniteInput(SpeckleCutError):
    pass


class MissingForwardCache(SpeckleCutError):
    pass


class InvalidArchitecture(SpeckleCutError):
    pass


# --- imaging ---

class MalformedFile(SpeckleCutError):
    pass


class UnsupportedVariant(SpeckleCutError):
    pass


class ChannelMismatch(SpeckleCutError):
    pass


class WavelengthOutOfRange(SpeckleCutError):
    pass


class IoFailure(SpeckleCutError):
    pass


# --- training ---

class InvalidDistribution(SpeckleCutError):
    pass


class EmptyDataset(SpeckleCutError):
    pass


# --- metrics ---

class LabelOutOfRange(SpeckleCutError):
    pass


class LengthMismatch(SpeckleCutError):
    pass


class EmptyMatrix(SpeckleCutError):
    pass


class SingleClassInput(SpeckleCutError):
    pass


# --- energy ---

class ZeroBaseline(SpeckleCutError):
    pass


class EmptyTrace(SpeckleCutError):
    pass


# --- checkpoints ---

class CheckpointError(SpeckleCutError):
    pass


class BadMagic(CheckpointError):
    pass


class VersionMismatch(CheckpointError):
    pass


class CrcMismatch(CheckpointError):
    pass


class TruncatedFile(CheckpointError):
    pass


# --- CLI ---

class UsageError(SpeckleCutError):
    pass
