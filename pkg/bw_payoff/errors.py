from __future__ import annotations

from typing import Any, Dict, Optional


class BWPayoffError(Exception):
    """Base class for every error raised by bw_payoff."""


class DomainError(BWPayoffError, ValueError):
    pass


class ConfigError(BWPayoffError, ValueError):
    pass


class InfeasibleError(BWPayoffError):
    pass


class IntegrationError(BWPayoffError, ArithmeticError):
    def __init__(self, message: str, *, node: Optional[float] = None, value: Any = None):
        super().__init__(message)
        self.node = node
        self.value = value


class UnboundedArgmin(BWPayoffError, ArithmeticError):
    """dh_t/dy stays negative up to the bracket ceiling."""

    def __init__(self, message: str, *, t: Optional[float] = None):
        super().__init__(message)
        self.t = t


class SolverError(BWPayoffError, RuntimeError):
    def __init__(
        self,
        message: str,
        *,
        residuals: Optional[Dict[str, float]] = None,
        iterations: int = 0,
    ):
        super().__init__(message)
        self.residuals = dict(residuals or {})
        self.iterations = iterations
