"""Exception hierarchy.

Errors are grouped by the CLI exit code they map to: configuration problems
(exit 2), bad or missing data (exit 3) and radar-only contract violations
(exit 4).  Numerical failures inside a library call are ``DataError``s too,
since they always trace back to the inputs.
"""


class ViscError(Exception):
    exit_code = 1


class ConfigError(ViscError):
    exit_code = 2


class DataError(ViscError):
    exit_code = 3


class InvalidConfig(ConfigError, ValueError):
    pass


class InvalidHyper(ConfigError, ValueError):
    pass


class DegenerateConfiguration(DataError):
    """Point sets cannot determine a unique rigid transform."""


class EmptySegment(DataError, ValueError):
    pass


class EmptyBatch(DataError, ValueError):
    pass


class EmptyFrame(DataError, ValueError):
    pass


class LengthMismatch(DataError, ValueError):
    pass


class IdMismatch(DataError, ValueError):
    pass


class NonMonotoneTime(DataError, ValueError):
    pass


class SingularSystem(DataError):
    pass


class NonPsdNoise(DataError, ValueError):
    pass


class NonPsdMeasurement(DataError, ValueError):
    pass


class BehindCamera(DataError):
    pass


class NoVisiblePoints(DataError):
    pass


class NoValidPoints(DataError):
    pass


class FrameGap(DataError):
    pass


class AlignmentError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, path, line, msg):
        super().__init__(f"{path}:{line}: {msg}")
        self.path = path
        self.line = line


class IoError(DataError):
    def __init__(self, path, msg="cannot read file"):
        super().__init__(f"{msg}: {path}")
        self.path = path


class ContractViolation(ViscError):
    exit_code = 4
