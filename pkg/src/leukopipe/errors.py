"""Exception taxonomy shared by all modules."""


class DimensionError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class ParameterError(ValueError):
    """A numeric parameter is outside its documented range."""


class ContractError(RuntimeError):
    """An API precondition was violated (e.g. backward on a non-scalar)."""


class InsufficientBatchError(ValueError):
    """Batch statistics were requested on a batch that is too small."""


class DataError(ValueError):
    """Input data is malformed or inconsistent."""


class GraphError(DataError):
    """A feature graph cannot be built from the given rows."""


class IngestionError(DataError):
    """A dataset could not be read; the message names the offending entry."""


class FitnessError(RuntimeError):
    """A fitness evaluation could not be completed."""


class TrainingError(RuntimeError):
    """Training cannot proceed on the given data."""


class ReportError(RuntimeError):
    """Run artifacts required for reporting are missing or inconsistent."""


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name and the cause."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
