"""Bregman generators, pointwise Bregman divergences and the Bregman-Wasserstein
divergence between two quantile curves (comonotone coupling)."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
from scipy.special import lambertw

from .errors import DomainError, IntegrationError
from .quantile import QuadratureGrid, QuadratureSpec, QuantileCurve, grid_for

logger = logging.getLogger(__name__)

BASE_KINDS = ("quadratic", "entropic")
KINDS = BASE_KINDS + ("thresholded",)
DEFAULT_THETA = 1e-8


def _out(values: np.ndarray, like: Any) -> Any:
    return float(values) if np.ndim(like) == 0 else values


# ---- base generators (no threshold, no regularisation) ----

def _base_value(kind: str, x: np.ndarray) -> np.ndarray:
    if kind == "quadratic":
        return x * x
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def _base_derivative(kind: str, x: np.ndarray) -> np.ndarray:
    if kind == "quadratic":
        return 2.0 * x
    with np.errstate(divide="ignore"):
        return np.log(x) + 1.0


def _base_second(kind: str, x: np.ndarray) -> np.ndarray:
    if kind == "quadratic":
        return np.full(x.shape, 2.0)
    with np.errstate(divide="ignore"):
        return 1.0 / x


def _base_divergence(kind: str, z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
    d = z1 - z2
    if kind == "quadratic":
        return d * d
    # z1 ln(z1/z2) - (z1 - z2), written with log1p for z1 close to z2
    with np.errstate(divide="ignore", invalid="ignore"):
        lead = np.where(z1 > 0, z1 * np.log1p(d / z2), 0.0)
    return lead - d


@dataclass(frozen=True)
class BregmanGenerator:
    """Convex generator phi, optionally linearised above `alpha`, plus theta/2 * x^2.

    kind is quadratic, entropic or thresholded; a thresholded generator names its
    base kind in `base`.
    """

    kind: str = "quadratic"
    base: Optional[str] = None
    alpha: Optional[float] = None
    theta: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise DomainError(f"unknown generator kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "thresholded":
            if self.base not in BASE_KINDS:
                raise DomainError(f"thresholded generator needs base in {BASE_KINDS}, got {self.base!r}")
            if self.alpha is None or not np.isfinite(self.alpha) or self.alpha <= 0:
                raise DomainError(f"threshold alpha must be > 0, got {self.alpha!r}")
            object.__setattr__(self, "alpha", float(self.alpha))
        else:
            if self.alpha is not None:
                raise DomainError("alpha is only meaningful for thresholded generators")
            object.__setattr__(self, "base", self.kind)
        if not np.isfinite(self.theta) or self.theta < 0:
            raise DomainError(f"regularisation theta must be >= 0, got {self.theta!r}")
        object.__setattr__(self, "theta", float(self.theta))

    @property
    def thresholded(self) -> bool:
        return self.kind == "thresholded"

    @property
    def label(self) -> str:
        name = "phi1" if self.base == "quadratic" else "phi2"
        if self.thresholded:
            name += f"~(a={self.alpha:g})"
        return name

    def _check(self, x: Any, *, strict: bool) -> np.ndarray:
        arr = np.asarray(x, dtype=float)
        need_pos = strict and self.base == "entropic"
        bad = ~(arr > 0) if need_pos else ~(arr >= 0)
        if np.any(bad):
            raise DomainError(f"generator argument outside domain for {self.label}: {x!r}")
        return arr

    # -- value and derivatives --

    def _raw_value(self, x: np.ndarray) -> np.ndarray:
        if not self.thresholded:
            return _base_value(self.base, x)
        a = self.alpha
        va = _base_value(self.base, np.asarray(a))
        da = _base_derivative(self.base, np.asarray(a))
        return np.where(x <= a, _base_value(self.base, np.minimum(x, a)), da * (x - a) + va)

    def _raw_derivative(self, x: np.ndarray) -> np.ndarray:
        if not self.thresholded:
            return _base_derivative(self.base, x)
        return _base_derivative(self.base, np.minimum(x, self.alpha))

    def value(self, x: Any) -> Any:
        arr = self._check(x, strict=False)
        return _out(self._raw_value(arr) + 0.5 * self.theta * arr * arr, x)

    def derivative(self, x: Any) -> Any:
        arr = self._check(x, strict=True)
        return _out(self._raw_derivative(arr) + self.theta * arr, x)

    def second_derivative(self, x: Any) -> Any:
        arr = self._check(x, strict=True)
        curv = _base_second(self.base, arr)
        if self.thresholded:
            curv = np.where(arr <= self.alpha, curv, 0.0)
        return _out(curv + self.theta, x)

    def slope_at_zero(self) -> float:
        """phi'(0+): 0 for quadratic bases, -inf for entropic ones."""
        return 0.0 if self.base == "quadratic" else -np.inf

    def slope_ceiling(self) -> float:
        """Supremum of phi' (finite only for thresholded generators without regularisation)."""
        if self.thresholded and self.theta == 0:
            return float(_base_derivative(self.base, np.asarray(self.alpha)))
        return np.inf

    def derivative_inverse(self, slope: Any) -> Any:
        """x >= 0 with phi'(x) = slope; on the flat piece above alpha returns alpha."""
        s = np.asarray(slope, dtype=float)
        lo, hi = self.slope_at_zero(), self.slope_ceiling()
        tol = 1e-12 * max(1.0, abs(hi)) if np.isfinite(hi) else 0.0
        if np.any(np.isnan(s)) or np.any(s < lo) or np.any(s > hi + tol):
            raise DomainError(f"slope outside the range of {self.label}'s derivative: {slope!r}")
        return _out(self._inverse(np.minimum(s, hi)), slope)

    def generalized_inverse(self, slope: Any) -> np.ndarray:
        """inf{y >= 0 : phi'(y) >= slope}: 0 below phi'(0+), +inf above sup phi'."""
        s = np.asarray(slope, dtype=float)
        lo, hi = self.slope_at_zero(), self.slope_ceiling()
        inner = np.clip(s, lo if np.isfinite(lo) else -np.inf, hi)
        x = self._inverse(np.where(np.isfinite(inner), inner, 0.0))
        x = np.where(s <= lo, 0.0, x)
        return np.where(s > hi, np.inf, x)

    def _inverse(self, s: np.ndarray) -> np.ndarray:
        th = self.theta
        if self.thresholded:
            a = self.alpha
            knee = float(_base_derivative(self.base, np.asarray(a))) + th * a
            below = _unthresholded_inverse(self.base, th, np.minimum(s, knee))
            if th == 0:
                return np.where(s >= knee, a, below)
            above = a + (s - knee) / th
            return np.where(s <= knee, np.minimum(below, a), above)
        return _unthresholded_inverse(self.base, th, s)

    # -- divergences --

    def divergence(self, z1: Any, z2: Any) -> Any:
        """B_phi(z1, z2) = phi(z1) - phi(z2) - phi'(z2)(z1 - z2), clamped at 0."""
        a = self._check(z1, strict=False)
        b = self._check(z2, strict=True)
        a, b = np.broadcast_arrays(a, b)
        if self.thresholded:
            raw = self._thresholded_divergence(a, b)
        else:
            raw = _base_divergence(self.base, a, b)
        d = a - b
        out = np.maximum(raw + 0.5 * self.theta * d * d, 0.0)
        return float(out) if np.ndim(z1) == 0 and np.ndim(z2) == 0 else out

    def _thresholded_divergence(self, z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
        a = self.alpha
        al = np.full(z1.shape, a)
        lo1, lo2 = z1 <= a, z2 <= a
        both = _base_divergence(self.base, np.minimum(z1, a), np.minimum(z2, a))
        left_only = _base_divergence(self.base, np.minimum(z1, a), al)
        right_only = _base_divergence(self.base, al, np.minimum(z2, a)) + (
            _base_derivative(self.base, al) - _base_derivative(self.base, np.minimum(z2, a))
        ) * (z1 - a)
        return np.select(
            [lo1 & lo2, lo1 & ~lo2, ~lo1 & lo2],
            [both, left_only, right_only],
            default=0.0,
        )

    def generic_divergence(self, z1: Any, z2: Any) -> Any:
        """Textbook form phi(z1) - phi(z2) - phi'(z2)(z1 - z2), no closed-form shortcuts."""
        return self.value(z1) - self.value(z2) - self.derivative(z2) * (np.asarray(z1) - np.asarray(z2))

    # -- convexity classification --

    def strong_convexity_modulus(self) -> float:
        return (2.0 + self.theta) if self.kind == "quadratic" else self.theta

    def is_strictly_convex(self) -> bool:
        return not self.thresholded or self.theta > 0

    def describe(self) -> dict:
        return {"kind": self.kind, "base": self.base, "alpha": self.alpha, "theta": self.theta, "label": self.label}


def _unthresholded_inverse(base: str, theta: float, s: np.ndarray) -> np.ndarray:
    if base == "quadratic":
        return np.maximum(s, 0.0) / (2.0 + theta)
    if theta == 0:
        return np.exp(s - 1.0)
    # ln x + 1 + theta x = s  <=>  x = W(theta e^{s-1}) / theta
    with np.errstate(over="ignore"):
        z = theta * np.exp(s - 1.0)
    w = np.real(lambertw(z))
    # lambertw(inf) is inf; for large z use the asymptotic ln z - ln ln z refinement
    big = ~np.isfinite(z)
    if np.any(big):
        lz = np.log(theta) + (s - 1.0)
        w = np.where(big, lz - np.log(lz), w)
    return w / theta


def make_generator(
    kind: str,
    base: Optional[str] = None,
    alpha: Optional[float] = None,
    theta: Optional[float] = None,
) -> BregmanGenerator:
    """Build a generator with the default regularisation (1e-8 unless quadratic)."""
    if theta is None:
        theta = 0.0 if kind == "quadratic" else DEFAULT_THETA
    if kind == "thresholded" and base is None:
        base = "quadratic"
    return BregmanGenerator(kind=kind, base=base, alpha=alpha, theta=theta)


def generator_value(gen: BregmanGenerator, x: Any) -> Any:
    return gen.value(x)


def generator_derivative(gen: BregmanGenerator, x: Any) -> Any:
    return gen.derivative(x)


def generator_derivative_inverse(gen: BregmanGenerator, slope: Any) -> Any:
    return gen.derivative_inverse(slope)


def generator_second_derivative(gen: BregmanGenerator, x: Any) -> Any:
    return gen.second_derivative(x)


def bregman_divergence(gen: BregmanGenerator, z1: Any, z2: Any) -> Any:
    return gen.divergence(z1, z2)


def bw_divergence(
    F1: QuantileCurve,
    F2: QuantileCurve,
    gen: BregmanGenerator,
    quad: Optional[QuadratureSpec] = None,
    *,
    grid: Optional[QuadratureGrid] = None,
) -> float:
    """Integral over (0,1) of B_phi(F1(t), F2(t)) dt."""
    g = grid or grid_for(quad, F1, F2)
    v1, v2 = F1.on_grid(g), F2.on_grid(g)
    if gen.base == "entropic":
        zero = ~(v2 > 0)
        if np.any(zero):
            i = int(np.flatnonzero(zero)[0])
            raise IntegrationError(
                f"second curve vanishes at t={g.t[i]:.6g}; entropic divergence undefined",
                node=float(g.t[i]),
                value=float(v2[i]),
            )
    vals = gen.divergence(v1, v2)
    return g.integrate(vals, what="Bregman integrand")
