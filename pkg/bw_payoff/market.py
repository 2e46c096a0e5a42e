"""Black-Scholes market: the lognormal state-price density phi_T, the law of the
stock under both measures, pricing weights for the cost functional, and the map
from a quantile curve to the cost-efficient payoff as a function of S_T."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import DomainError
from .quantile import QuadratureGrid, QuantileCurve

MEASURES = ("P", "Q")


def _out(values: np.ndarray, like: Any) -> Any:
    return float(values) if np.ndim(like) == 0 else values


def _unit(t: Any) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.any(~((arr > 0) & (arr < 1))):
        raise DomainError(f"probability level must lie in (0,1), got {t!r}")
    return arr


def _positive(x: Any, what: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"{what} must be > 0, got {x!r}")
    return arr


@dataclass(frozen=True)
class MarketModel:
    r: float = 0.0
    mu_s: float = 0.05
    sigma_s: float = 0.1
    T: float = 5.0
    S0: float = 1.0

    def __post_init__(self) -> None:
        for name in ("r", "mu_s", "sigma_s", "T", "S0"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise DomainError(f"market parameter {name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)
        if self.sigma_s <= 0:
            raise DomainError(f"stock volatility must be > 0, got {self.sigma_s}")
        if self.T <= 0:
            raise DomainError(f"horizon T must be > 0, got {self.T}")
        if self.S0 <= 0:
            raise DomainError(f"initial stock price must be > 0, got {self.S0}")
        if self.mu_s <= self.r:
            raise DomainError(
                f"market price of risk must be positive (mu_s={self.mu_s} <= r={self.r}); "
                "the cost-efficient payoff map needs phi_T decreasing in S_T"
            )

    # ---- derived parameters ----

    @property
    def theta(self) -> float:
        return (self.mu_s - self.r) / self.sigma_s

    @property
    def mu_phi(self) -> float:
        return -(self.r + 0.5 * self.theta ** 2) * self.T

    @property
    def sigma_phi(self) -> float:
        return self.theta * math.sqrt(self.T)

    @property
    def discount(self) -> float:
        return math.exp(-self.r * self.T)

    @property
    def growth(self) -> float:
        return math.exp(self.r * self.T)

    # ---- state-price density ----

    def spd_quantile(self, t: Any) -> Any:
        arr = _unit(t)
        return _out(np.exp(self.mu_phi + self.sigma_phi * ndtri(arr)), t)

    def spd_cdf(self, x: Any) -> Any:
        arr = _positive(x, "state-price density value")
        return _out(ndtr((np.log(arr) - self.mu_phi) / self.sigma_phi), x)

    def pricing_kernel(self, t: Any) -> Any:
        """xi(t) = spd_quantile(1 - t), evaluated without forming 1 - t."""
        arr = _unit(t)
        return _out(np.exp(self.mu_phi - self.sigma_phi * ndtri(arr)), t)

    def pricing_weights(self, grid: QuadratureGrid) -> np.ndarray:
        """Quadrature weights for integral of G(t) * xi(t) dt on `grid`.

        Interior nodes carry w_i * xi(t_i); each clip node carries the exact
        kernel mass of its tail, E[phi_T; phi_T beyond the clip quantile].
        """
        w = np.array(grid.w, dtype=float)
        w[1:-1] *= np.exp(self.mu_phi - self.sigma_phi * grid.z[1:-1])
        z_clip = float(grid.z[0])
        w[0] = self.discount * float(ndtr(z_clip + self.sigma_phi))
        w[-1] = self.discount * float(ndtr(z_clip - self.sigma_phi))
        return w

    # ---- stock ----

    def stock_log_params(self, measure: str = "P") -> Tuple[float, float]:
        if measure not in MEASURES:
            raise DomainError(f"measure must be one of {MEASURES}, got {measure!r}")
        drift = self.mu_s if measure == "P" else self.r
        m = math.log(self.S0) + (drift - 0.5 * self.sigma_s ** 2) * self.T
        return m, self.sigma_s * math.sqrt(self.T)

    def stock_quantile(self, t: Any, measure: str = "P") -> Any:
        arr = _unit(t)
        m, s = self.stock_log_params(measure)
        return _out(np.exp(m + s * ndtri(arr)), t)

    def stock_cdf(self, s: Any, measure: str = "P") -> Any:
        arr = _positive(s, "stock price")
        m, sd = self.stock_log_params(measure)
        return _out(ndtr((np.log(arr) - m) / sd), s)

    def spd_of_stock(self, s: Any) -> Any:
        """phi_T as a function of S_T, with the Brownian driver recovered from s."""
        arr = _positive(s, "stock price")
        w_T = (np.log(arr / self.S0) - (self.mu_s - 0.5 * self.sigma_s ** 2) * self.T) / self.sigma_s
        return _out(np.exp(-(self.r + 0.5 * self.theta ** 2) * self.T - self.theta * w_T), s)

    def describe(self) -> Dict[str, float]:
        return {
            "r": self.r,
            "mu_s": self.mu_s,
            "sigma_s": self.sigma_s,
            "T": self.T,
            "S0": self.S0,
            "theta": self.theta,
            "mu_phi": self.mu_phi,
            "sigma_phi": self.sigma_phi,
        }


_LEVEL_MIN = np.finfo(float).tiny
_LEVEL_MAX = np.nextafter(1.0, 0.0)


def payoff_from_quantile(curve: QuantileCurve, market: MarketModel, s: Any) -> Any:
    """X(s) = curve(1 - F_phi(phi(s))): the cost-efficient payoff at stock price s."""
    phi = np.asarray(market.spd_of_stock(s), dtype=float)
    # 1 - F_phi(x) computed as the upper normal tail to keep precision
    level = ndtr(-(np.log(phi) - market.mu_phi) / market.sigma_phi)
    level = np.clip(level, _LEVEL_MIN, _LEVEL_MAX)
    vals = curve(np.atleast_1d(level))
    return _out(np.asarray(vals).reshape(np.shape(level)), s)


def stock_grid(lo: float = 0.05, hi: float = 2.5, points: int = 400) -> np.ndarray:
    if not (0 < lo < hi) or points < 2:
        raise DomainError(f"stock grid needs 0 < lo < hi and >= 2 points, got ({lo}, {hi}, {points})")
    return np.linspace(lo, hi, int(points))


def payoff_curve(
    curve: QuantileCurve, market: MarketModel, grid: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, np.ndarray]:
    s = stock_grid() if grid is None else np.asarray(grid, dtype=float)
    return s, np.asarray(payoff_from_quantile(curve, market, s), dtype=float)


def payoff_price(curve: QuantileCurve, market: MarketModel, nodes: int = 800) -> float:
    """E[phi_T * X(S_T)] by Gauss-Legendre over normal scores in [-9, 9] of the stock's law under P."""
    x, wx = np.polynomial.legendre.leggauss(nodes)
    z = 9.0 * x
    dens = 9.0 * wx * np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    m, sd = market.stock_log_params("P")
    s = np.exp(m + sd * z)
    return float(np.dot(dens, market.spd_of_stock(s) * payoff_from_quantile(curve, market, s)))
