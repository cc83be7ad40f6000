class HetbenchError(Exception):
    '''Base class for all exceptions raised by ``hetbench``'''


class ValidationError(HetbenchError, ValueError):
    '''Raised when a configuration or data record is invalid'''


class RequiredMissing(ValidationError):
    '''Raised when a required field is missing'''


class WrongType(ValidationError):
    '''Raised when a field does not have the correct type'''


class WrongValue(ValidationError):
    '''Raised when a field has a value that is not allowed'''


class UnknownKey(ValidationError):
    '''Raised when a record contains a key not defined by its schema'''


class DuplicateName(ValidationError):
    '''Raised when two framework profiles share a name'''


class MalformedRow(ValidationError):
    '''Raised when a row of a power log cannot be parsed'''


class NonMonotonic(ValidationError):
    '''Raised when power log timestamps are not strictly increasing'''


class EmptyComparison(HetbenchError, ValueError):
    '''Raised when two effort columns have no application in common'''


class ScanError(HetbenchError, OSError):
    '''Raised when a source file or tree cannot be read'''
    def __init__(self, msg, path=None):
        super().__init__(msg)
        self.path = path


class SessionStateError(HetbenchError, RuntimeError):
    '''Raised when a measurement session is used out of order'''


class BuildFailed(HetbenchError):
    '''Raised when the build command of a benchmark fails'''


class BinaryFileSkipped(UserWarning):
    '''Issued when a scanned file contains NUL bytes'''


class UnreadableFile(UserWarning):
    '''Issued when a file found during a tree scan cannot be read'''


class InsufficientSamples(UserWarning):
    '''Issued when fewer than two power samples cover an integration window'''


class NoPowerSource(UserWarning):
    '''Issued when only wallclock measurement is available'''


class PowerReadError(HetbenchError):
    '''Raised when a power source does not deliver a reading'''


class StartFailed(HetbenchError):
    '''Raised when the run command of a benchmark cannot be executed'''
