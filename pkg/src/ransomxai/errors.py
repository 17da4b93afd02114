"""Exception hierarchy shared by every stage of the pipeline."""


class RansomXAIError(Exception):
    """Base class for all errors raised by this package."""


# core data
class MissingColumn(RansomXAIError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class UnknownLabel(RansomXAIError, ValueError):
    pass


class TypeMismatch(RansomXAIError, ValueError):
    pass


class ClassTooSmall(RansomXAIError, ValueError):
    pass


class InvalidSpec(RansomXAIError, ValueError):
    pass


# pcap
class BadMagic(RansomXAIError, ValueError):
    pass


class PcapNgUnsupported(BadMagic):
    pass


class TruncatedHeader(RansomXAIError, ValueError):
    pass


class UnsupportedLinkType(RansomXAIError, ValueError):
    pass


# preprocessing
class NotFitted(RansomXAIError, RuntimeError):
    pass


class ColumnUnimputable(RansomXAIError, ValueError):
    pass


# learners
class SingularInput(RansomXAIError, ValueError):
    pass


class DegenerateClass(RansomXAIError, ValueError):
    pass


class ShapeMismatch(RansomXAIError, ValueError):
    pass


class NotTrained(NotFitted):
    pass


# selection / search
class FoldTooSmall(RansomXAIError, ValueError):
    pass


class ConfigMismatch(RansomXAIError, ValueError):
    pass


# explanation
class DegenerateSystem(RansomXAIError, ArithmeticError):
    pass


class TooManyFeatures(RansomXAIError, ValueError):
    pass


# evaluation
class LengthMismatch(RansomXAIError, ValueError):
    pass


class EmptyMatrix(RansomXAIError, ValueError):
    pass


class NonpositiveBaseline(RansomXAIError, ValueError):
    pass


# reporting
class MissingArtifacts(RansomXAIError, FileNotFoundError):
    pass


class InvalidConfig(RansomXAIError, ValueError):
    pass
