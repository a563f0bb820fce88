"""Exception types shared across the package."""

from __future__ import annotations


class SchemaDialogError(Exception):
    """Base class for all package errors."""


class ParseError(SchemaDialogError):
    """Malformed schema or corpus input. Carries a locus when one is known."""

    def __init__(self, message: str, *, locus: str | None = None):
        self.locus = locus
        super().__init__(message if locus is None else f"{message} (at {locus})")


class InvalidGraph(SchemaDialogError):
    """Operation requires a validated graph and the graph is not valid."""


class NotCandidateNode(SchemaDialogError):
    """Node is not a user-utterance or database-response node."""


class UnknownTask(SchemaDialogError):
    pass


class UnknownHoldout(SchemaDialogError):
    pass


class DegenerateSplit(SchemaDialogError):
    pass


class ConfigError(SchemaDialogError):
    pass


class SequenceTooLong(SchemaDialogError):
    pass


class ShapeMismatch(SchemaDialogError):
    pass


class DimensionMismatch(SchemaDialogError):
    pass


class EmptyContext(SchemaDialogError):
    pass


class EmptyCandidates(SchemaDialogError):
    pass


class UnknownAction(SchemaDialogError):
    pass


class MissingHead(SchemaDialogError):
    """Combined schema+classifier output requested without a classifier head."""


class GoldNodeMissing(SchemaDialogError):
    """A training example's gold action has no matching schema node."""


class DivergenceError(SchemaDialogError):
    """Training loss became non-finite."""


class LengthMismatch(SchemaDialogError):
    pass


class EmptyInput(SchemaDialogError):
    pass


class InsufficientSeeds(SchemaDialogError):
    pass


class UnknownSession(SchemaDialogError):
    pass


class ModelError(SchemaDialogError):
    pass
