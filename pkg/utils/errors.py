"""
.. module:: errors
   :platform: Python
   :synopsis: Exception hierarchy shared by every lab module.

All lab exceptions derive from :class:`RbmLabError`. ``main.py`` maps them to exit codes.
"""

from typing import Optional


class RbmLabError(Exception):
    """
    Base class for all lab errors.
    """


class InvalidConfigError(RbmLabError, ValueError):
    """
    A parameter, index or configuration value is outside its documented range.

    :param message: Human readable description.
    :param line: Optional 1-based line of the config file the problem was found on.
    :param source: Optional path of the config file.
    """

    def __init__(self, message: str, line: Optional[int] = None, source: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.line = line
        self.source = source

    def __str__(self) -> str:
        if self.source and self.line:
            return f"{self.source}:{self.line}: {self.message}"
        if self.line:
            return f"line {self.line}: {self.message}"
        return self.message

    def __reduce__(self):
        return (self.__class__, (self.message, self.line, self.source))


class InvalidIntensityError(InvalidConfigError):
    """
    A Poisson reference intensity is not strictly positive.
    """


class NearSingularError(RbmLabError, ArithmeticError):
    """
    A factorization met a pivot below ``1e-13 * ||H||``; retry with a positive imaginary part.
    """


class InsufficientDecayRangeError(RbmLabError, ValueError):
    """
    A decay fit has fewer than four usable distances.
    """


class TaskFailedError(RbmLabError, RuntimeError):
    """
    A Monte Carlo task raised; carries the failing task index.
    """

    def __init__(self, index: int, detail: str = ""):
        super().__init__(index, detail)
        self.index = index
        self.detail = detail

    def __str__(self) -> str:
        return f"task {self.index} failed: {self.detail}"


class AcceptanceFailure(RbmLabError):
    """
    One or more acceptance criteria were not met.
    """
