"""Exception hierarchy shared by the solvers, the I/O layer and the CLI.

Each family carries the exit code the command line reports for it:
configuration problems exit with 2, numerical failures with 3 and file
system failures with 4.
"""

from __future__ import annotations

from typing import Any, Optional


class SimulationError(Exception):
    """Base class for every error raised by the simulator"""

    exit_code = 1

    def __init__(self, message: str, *, index: Optional[int] = None):
        self.message = message
        self.index = index
        self.context: list[str] = []
        super().__init__(message)

    def add_context(self, **items: Any) -> "SimulationError":
        """Attach context such as step number or simulation time"""
        self.context.append(", ".join(f"{key}={value}" for key, value in items.items()))
        return self

    def __str__(self) -> str:
        text = self.message
        if self.index is not None:
            text = f"{text} (index {self.index})"
        if self.context:
            text = f"{text} [{'; '.join(self.context)}]"
        return text


class ConfigError(SimulationError):
    exit_code = 2


class ParseError(ConfigError):
    """Syntax error in a configuration document"""

    def __init__(self, message: str, *, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(ConfigError):
    """A value is outside its declared range or inconsistent with another value"""

    def __init__(self, message: str, *, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        prefix = []
        if line is not None:
            prefix.append(f"line {line}")
        if key is not None:
            prefix.append(f"'{key}'")
        if prefix:
            message = f"{' '.join(prefix)}: {message}"
        super().__init__(message)


class UnknownKey(ConfigError):
    def __init__(self, key: str, *, line: Optional[int] = None):
        self.key = key
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}unknown key '{key}'")


class DimensionMismatch(ConfigError):
    pass


class NonFiniteValue(ConfigError):
    pass


class NumericsError(SimulationError):
    exit_code = 3


class NonFiniteState(NumericsError):
    pass


class NonPhysicalState(NumericsError):
    pass


class DegenerateRiemann(NumericsError):
    pass


class NegativeDepth(NumericsError):
    pass


class NoConvergence(NumericsError):
    pass


class OrderingViolated(NumericsError):
    pass


class IoError(SimulationError):
    exit_code = 4

    def __init__(self, message: str, *, path: Any = None):
        self.path = path
        if path is not None:
            message = f"{message}: {path}"
        super().__init__(message)
