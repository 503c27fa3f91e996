"""Exception hierarchy shared by every module."""


class VRDSError(Exception):
    """Base class for all toolkit errors."""


class InvalidCoalitionError(VRDSError, ValueError):
    pass


class PreconditionError(VRDSError, ValueError):
    pass


class GameSpecError(VRDSError, ValueError):
    pass


class SizeCapError(VRDSError, ValueError):
    """Raised when an exhaustive computation is requested above the player cap."""


class BudgetError(VRDSError, ValueError):
    pass


class AllocationError(VRDSError, ValueError):
    pass


class DegenerateAllocationError(AllocationError):
    """All stratum standard deviations are zero; Neyman allocation is undefined."""


class FamilyError(VRDSError, ValueError):
    pass


class InsufficientRepeatsError(VRDSError, ValueError):
    pass


class DomainError(VRDSError, ValueError):
    pass


class OracleError(VRDSError, ValueError):
    pass


class ConfigError(VRDSError, ValueError):
    pass


class DataError(VRDSError):
    """Base class for dataset ingestion and persistence problems."""


class MissingFileError(DataError, FileNotFoundError):
    pass


class EmptyFileError(DataError, ValueError):
    pass


class ParseError(DataError, ValueError):
    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class SplitError(DataError, ValueError):
    pass


class AssignmentError(DataError, ValueError):
    pass


class SchemaVersionError(DataError, ValueError):
    pass


class ReportError(DataError, ValueError):
    pass


class PlotKindError(DataError, ValueError):
    pass
