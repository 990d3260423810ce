"""Exception hierarchy shared by every pipeline stage."""


class SceneTextError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(SceneTextError):
    """An input file is missing a field or has a field of the wrong type."""


class ValidationError(SceneTextError):
    """Input is well-formed but violates a domain invariant."""


class PlacementError(SceneTextError):
    """The synthetic generator could not pack the requested objects."""


class DegenerateDirection(SceneTextError):
    """A relative direction has no usable horizontal component."""


class DimensionMismatch(ValidationError):
    pass


class EmptyCaption(ValidationError):
    pass


class InvalidK(ValidationError):
    pass


class UnknownId(ValidationError):
    pass


class MissingCaption(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class EmptyCorpus(ValidationError):
    pass


class ParseError(ValidationError):
    pass


class ProviderError(SceneTextError):
    """A remote or offline provider failed or returned a malformed response."""

    def __init__(self, message: str, *, retryable: bool = True) -> None:
        super().__init__(message)
        self.retryable = retryable
