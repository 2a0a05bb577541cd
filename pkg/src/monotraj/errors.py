"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line can map failures to
its stable contract: 2 usage, 3 data/integrity, 4 numeric divergence, 5 I/O.
"""


class MonotrajError(Exception):
    exit_code = 1


class ConfigError(MonotrajError, ValueError):
    """Invalid configuration value (bad layer size, negative noise, ...)."""

    exit_code = 2


class DataError(MonotrajError, ValueError):
    exit_code = 3


class SchemaError(DataError):
    pass


class ParseError(DataError):
    pass


class LabelError(DataError):
    pass


class IntegrityError(DataError):
    pass


class DimensionError(DataError):
    pass


class EmptyTaskError(DataError):
    pass


class SplitError(DataError):
    pass


class RankError(DataError):
    pass


class ContractError(DataError):
    """Caller broke an in-memory contract (misaligned lengths, empty input)."""


class CorrelationUndefinedError(DataError):
    pass


class ProtocolError(DataError):
    """Subject leakage across cross-validation partitions."""


class DivergenceError(MonotrajError, ArithmeticError):
    exit_code = 4

    def __init__(self, epoch, learning_rate, message=None):
        self.epoch = epoch
        self.learning_rate = learning_rate
        super().__init__(
            message
            or f"non-finite loss at epoch {epoch} (learning_rate={learning_rate:g})"
        )
