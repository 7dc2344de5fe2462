"""Exception hierarchy shared by every layer of the package."""


class DenseRecError(Exception):
    """Base class for all package errors."""


class ShapeError(DenseRecError, ValueError):
    pass


class ContractError(DenseRecError, ValueError):
    """An operation was called outside its documented preconditions."""


class VocabularyError(DenseRecError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class MissingContentError(DenseRecError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class GatherIndexError(DenseRecError, IndexError):
    pass


class ConfigError(DenseRecError):
    pass


class DataError(DenseRecError):
    """Unreadable or malformed input data."""


class NumericalError(DenseRecError, FloatingPointError):
    """Non-finite values appeared during training."""
