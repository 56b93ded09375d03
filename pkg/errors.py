"""
Exception hierarchy and process exit codes
"""
from typing import List, Optional

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_NO_CERTIFICATE = 2


class SwitchCertError(Exception):
    """Base class for every error raised by the certifier"""


class InvalidInputError(SwitchCertError, ValueError):
    """An argument violates the operation's input contract"""


class PreconditionError(SwitchCertError):
    """An operation was called outside its precondition"""


class UsageError(SwitchCertError):
    """Command-line misuse (missing signal file, unknown subcommand)"""


class ProblemParseError(SwitchCertError):
    """Problem document could not be parsed; carries the location"""

    def __init__(self, message: str, line: Optional[int] = None,
                 column: Optional[int] = None, field: Optional[str] = None):
        self.line = line
        self.column = column
        self.field = field
        location = []
        if line is not None:
            location.append(f"line {line}")
        if column is not None:
            location.append(f"column {column}")
        if field:
            location.append(f"field '{field}'")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(f"{message}{suffix}")


class InstanceValidationError(SwitchCertError):
    """Instance failed validation; `violations` lists every problem found"""

    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "invalid instance")
