"""Exception types raised across the package."""


class DMVSTError(Exception):
    """Base class for every error raised by dmvst."""


class ShapeError(DMVSTError, ValueError):
    pass


class RankError(DMVSTError, ValueError):
    pass


class SequenceError(ShapeError):
    pass


class DegenerateBatchError(DMVSTError, ValueError):
    pass


class OptimizerError(DMVSTError, FloatingPointError):
    pass


class FormatError(DMVSTError, ValueError):
    """Too many malformed rows in an input stream."""


class DegenerateRangeError(DMVSTError, ValueError):
    pass


class InsufficientHistoryError(DMVSTError, ValueError):
    pass


class InsufficientDataError(DMVSTError, ValueError):
    pass


class SplitError(DMVSTError, ValueError):
    pass


class InputError(DMVSTError, ValueError):
    pass


class GraphError(DMVSTError, ValueError):
    pass


class LossDomainError(DMVSTError, ValueError):
    pass


class TrainingError(DMVSTError, RuntimeError):
    pass


class DivergenceError(TrainingError):
    def __init__(self, epoch: int, batch: int, value: float):
        super().__init__(f"non-finite loss {value} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


class ConsistencyError(DMVSTError, ValueError):
    pass


class CheckpointError(DMVSTError, ValueError):
    pass


class MetricDomainError(DMVSTError, ValueError):
    pass


class MetricError(DMVSTError, ValueError):
    pass


class EvaluationError(DMVSTError, ValueError):
    pass


class ConfigError(DMVSTError, ValueError):
    pass
