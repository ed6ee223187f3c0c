"""
Error types shared across the package
"""
from typing import Optional


class RegraftError(Exception):
    """Base class for every error raised by regraft"""


class InvalidArgumentError(RegraftError, ValueError):
    """A shape, dimension or contract violation in the arguments"""


class NumericError(RegraftError, ArithmeticError):
    """Non-finite values or an unsolvable numeric system"""


class CapabilityError(RegraftError):
    """A gradient was requested from a predictor that cannot provide one"""


class ParseError(RegraftError):
    """A malformed model or data file"""

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(f"{where}{message}")


class ConfigError(RegraftError):
    """An unknown key, a type mismatch or a missing key in a run config"""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None,
                 path: Optional[str] = None):
        self.message = message
        self.key = key
        self.line = line
        self.path = path
        prefix = f"{path}: " if path is not None else ""
        if line is not None:
            prefix += f"line {line}: "
        if key is not None:
            prefix += f"'{key}': "
        super().__init__(f"{prefix}{message}")
