from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import DomainError


def _out(values: np.ndarray, like: Any) -> Any:
    return float(values) if np.ndim(like) == 0 else values


def _positive(x: Any, what: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"{what} must be strictly positive, got {x!r}")
    return arr


@dataclass(frozen=True)
class UtilitySpec:
    """CRRA utility with relative risk aversion gamma.

    gamma == 1 selects the log branch by exact parameter equality.
    """

    gamma: float = 1.0

    def __post_init__(self) -> None:
        g = float(self.gamma)
        if not np.isfinite(g) or g <= 0:
            raise DomainError(f"risk aversion gamma must be > 0, got {self.gamma!r}")
        object.__setattr__(self, "gamma", g)

    @property
    def is_log(self) -> bool:
        return self.gamma == 1.0

    def utility(self, x: Any) -> Any:
        arr = _positive(x, "wealth")
        if self.is_log:
            return _out(np.log(arr), x)
        g = self.gamma
        return _out(np.expm1((1.0 - g) * np.log(arr)) / (1.0 - g), x)

    def marginal(self, x: Any) -> Any:
        arr = _positive(x, "wealth")
        return _out(arr ** (-self.gamma), x)

    def inverse_marginal(self, y: Any) -> Any:
        arr = _positive(y, "marginal utility")
        return _out(arr ** (-1.0 / self.gamma), y)

    def curvature(self, x: Any) -> Any:
        """-u''(x) = gamma * x^(-gamma-1), positive."""
        arr = _positive(x, "wealth")
        return _out(self.gamma * arr ** (-self.gamma - 1.0), x)

    def label(self) -> str:
        return f"gamma={self.gamma:g}"
