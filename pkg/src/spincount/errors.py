"""Typed errors. Each class carries the process exit code used by the CLI."""


class SpinError(Exception):
    exit_code = 1


class UsageError(SpinError):
    exit_code = 2


class ParseError(SpinError):
    exit_code = 3

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class RangeError(SpinError):
    exit_code = 4


class ValidationError(SpinError):
    exit_code = 5


class SizeError(SpinError):
    exit_code = 6


class NonPermissiveError(SpinError):
    exit_code = 7


class InfeasiblePinningError(SpinError):
    exit_code = 8


class SolverError(SpinError):
    exit_code = 9


class BracketingError(SpinError):
    exit_code = 10


class InitError(SpinError):
    exit_code = 11
