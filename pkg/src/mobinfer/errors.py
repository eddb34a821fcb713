"""Exception hierarchy. Each class maps to one CLI exit status."""


class MobinferError(Exception):
    exit_code = 1


class ConfigError(MobinferError, ValueError):
    exit_code = 2


class TraceParseError(MobinferError, ValueError):
    exit_code = 3

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TraceValidationError(MobinferError, ValueError):
    exit_code = 4


class DomainError(MobinferError, ValueError):
    """Argument outside an operation's domain (bad time, bad node pair, ...)."""

    exit_code = 5


class SimulationError(MobinferError, RuntimeError):
    exit_code = 5
