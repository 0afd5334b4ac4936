"""Exception hierarchy.

Every pipeline error carries a ``category`` string; the CLI prints it as the
machine-parsable first token of its one-line failure message.
"""


class ADRSignalError(Exception):
    category = "Error"


class MalformedCode(ADRSignalError, ValueError):
    category = "MalformedCode"


class IngestError(ADRSignalError):
    category = "IngestError"


class FileUnreadable(IngestError):
    category = "FileUnreadable"


class MalformedRow(IngestError):
    category = "MalformedRow"

    def __init__(self, path, row, reason):
        self.path = str(path)
        self.row = row
        self.reason = reason
        super().__init__(f"{self.path}:{row}: {reason}")


class EmptyCohort(ADRSignalError):
    category = "EmptyCohort"


class UnknownPatient(ADRSignalError, KeyError):
    category = "UnknownPatient"

    def __str__(self):
        return Exception.__str__(self)


class TooFewPatients(ADRSignalError):
    category = "TooFewPatients"


class LengthMismatch(ADRSignalError, ValueError):
    category = "LengthMismatch"


class DegenerateInput(ADRSignalError, ValueError):
    category = "DegenerateInput"


class NonConvergence(ADRSignalError, ArithmeticError):
    category = "NonConvergence"


class BadPopulation(ADRSignalError, ValueError):
    category = "BadPopulation"


class AxisMismatch(ADRSignalError, ValueError):
    category = "AxisMismatch"


class InvalidConfig(ADRSignalError, ValueError):
    category = "InvalidConfig"


class ReportIOError(ADRSignalError, OSError):
    category = "IoError"
