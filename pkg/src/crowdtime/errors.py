"""Exception types shared across the package.

DataError subclasses signal bad input or misuse (CLI exit code 2);
NumericalFailure subclasses signal a numerical breakdown (CLI exit code 3).
"""


class CrowdTimeError(Exception):
    """Base class for every error raised by this package."""


class DataError(CrowdTimeError):
    """Invalid input data or invalid use of an operation."""


class NumericalFailure(CrowdTimeError):
    """A computation could not be completed reliably."""


class MalformedRow(DataError):
    def __init__(self, line_number, reason):
        super().__init__(f"line {line_number}: {reason}")
        self.line_number = line_number
        self.reason = reason


class DuplicateJudgment(DataError):
    def __init__(self, task_id, worker_id):
        super().__init__(f"duplicate judgment for task {task_id!r} by worker {worker_id!r}")
        self.task_id = task_id
        self.worker_id = worker_id


class LabelOutOfRange(DataError):
    pass


class NonPositiveTime(DataError):
    pass


class AllZeroWeights(NumericalFailure):
    pass


class NonPositiveCount(DataError):
    pass


class EmptyInterval(DataError):
    pass


class IntervalMassUnderflow(NumericalFailure):
    pass


class TaskWithoutJudgments(DataError):
    pass


class NotBinary(DataError):
    pass


class InvalidIterationCounts(DataError):
    pass


class SingleClassGold(DataError):
    pass


class EmptyInput(DataError):
    pass


class MissingGold(DataError):
    pass


class MissingDurationState(DataError):
    pass


class FractionTooSmall(DataError):
    pass


class ConfigInvalid(DataError):
    pass


class UnknownModel(DataError):
    pass
