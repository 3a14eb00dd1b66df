"""Exception types shared across the package."""


class StableMILError(Exception):
    """Base class for all library errors."""


class DimMismatch(StableMILError):
    """Feature dimensions disagree where they must match."""


class UnknownTruth(StableMILError):
    """An operation requiring ground-truth instance roles met an unknown one."""


class ParseError(StableMILError):
    """A dataset file is malformed; carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyDataset(StableMILError):
    """A dataset source contained no bags."""


class SingleClass(StableMILError):
    """A trainer needs both classes but saw only one."""


class MissingClass(SingleClass):
    """A dataset lacks positive or negative bags where both are required."""


class TooFewPoints(StableMILError):
    """Not enough points for the requested number of mixture components."""


class NotNegativeBag(StableMILError):
    """A treatment operation was handed a bag whose label is not 0."""


class EmptyNegatives(StableMILError):
    """Instance scoring needs at least one negative bag."""


class TooFewNegatives(StableMILError):
    """Threshold selection needs at least two negative bags."""


class TooFewReferences(StableMILError):
    """Local scaling needs more reference instances than neighbors requested."""


class EmptyPool(StableMILError):
    """Bag embedding was asked to run against an empty instance pool."""


class MissingBackgroundTag(StableMILError):
    """Biased splitting needs per-bag background tags in the dataset meta."""


class InvalidConfig(StableMILError):
    """A configuration value or file is invalid."""


class SingleFeatureDegenerate(UserWarning):
    """All embedded vectors are identical; a majority-vote model is returned."""
