"""
Error taxonomy shared by the library, the CLI and the HTTP bridge.

Every error carries the process exit code the CLI maps it to:
  2 parse, 3 validation, 4 numerical, 5 audit failure.
"""


class CascadeError(Exception):
    exit_code = 1


class ConfigParseError(CascadeError, ValueError):
    exit_code = 2


class ConfigValidationError(CascadeError, ValueError):
    exit_code = 3


class SubsystemIndexError(ConfigValidationError, IndexError):
    exit_code = 3


class NumericalToleranceError(CascadeError, ArithmeticError):
    exit_code = 4


class InfiniteRelativeEntropyError(NumericalToleranceError):
    exit_code = 4


class AuditFailure(CascadeError):
    exit_code = 5


def error_detail(exc: BaseException) -> dict:
    return {"error_type": type(exc).__name__, "message": str(exc)}


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, CascadeError):
        return exc.exit_code
    return 1
