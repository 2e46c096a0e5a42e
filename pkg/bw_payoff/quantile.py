"""Quantile curves, the quadrature grid they are integrated on, and the
pricing and utility functionals written in quantile space.

Integrals over (0,1) are evaluated with composite Gauss-Legendre panels laid
out in the normal-score variable z = Phi^-1(t). The clipped tails [0, clip]
and [1-clip, 1] are represented by one node each (at clip and 1-clip) that
extends the curve constantly into the tail.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from .errors import DomainError, IntegrationError

if TYPE_CHECKING:  # pragma: no cover
    from .market import MarketModel
    from .preferences import UtilitySpec


# ---- Quadrature ----

@dataclass(frozen=True)
class QuadratureSpec:
    panels: int = 256
    nodes_per_panel: int = 4
    clip: float = 1e-6

    def __post_init__(self) -> None:
        if not (0.0 < float(self.clip) < 0.01):
            raise DomainError(f"quadrature clip must lie in (0, 0.01), got {self.clip!r}")
        if int(self.panels) < 1 or int(self.nodes_per_panel) < 1:
            raise DomainError("quadrature needs at least one panel and one node per panel")
        if int(self.panels) * int(self.nodes_per_panel) < 64:
            raise DomainError(
                f"quadrature needs >= 64 nodes, got {self.panels} x {self.nodes_per_panel}"
            )
        object.__setattr__(self, "panels", int(self.panels))
        object.__setattr__(self, "nodes_per_panel", int(self.nodes_per_panel))
        object.__setattr__(self, "clip", float(self.clip))


DEFAULT_QUADRATURE = QuadratureSpec()


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Nodes t (increasing, first/last are the clip points) and dt-weights w."""

    spec: QuadratureSpec
    breaks: Tuple[float, ...]
    t: np.ndarray
    z: np.ndarray
    w: np.ndarray

    @property
    def key(self) -> Tuple[QuadratureSpec, Tuple[float, ...]]:
        return (self.spec, self.breaks)

    @property
    def size(self) -> int:
        return int(self.t.size)

    @property
    def tail_mass(self) -> float:
        """Probability mass represented by the two constant-extension tail nodes."""
        return 2.0 * self.spec.clip

    def integrate(self, values: Any, *, weights: Optional[np.ndarray] = None, what: str = "integrand") -> float:
        vals = np.asarray(values, dtype=float)
        bad = ~np.isfinite(vals)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise IntegrationError(
                f"non-finite {what} at t={self.t[i]:.6g} (value {vals[i]!r})",
                node=float(self.t[i]),
                value=float(vals[i]),
            )
        wts = self.w if weights is None else weights
        return float(np.dot(wts, vals))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@lru_cache(maxsize=64)
def _build_grid(spec: QuadratureSpec, breaks: Tuple[float, ...]) -> QuadratureGrid:
    clip = spec.clip
    z_lo = float(ndtri(clip))
    z_hi = -z_lo
    edges = np.linspace(z_lo, z_hi, spec.panels + 1)
    inner = [float(ndtri(b)) for b in breaks if clip < b < 1.0 - clip]
    if inner:
        edges = np.unique(np.concatenate([edges, np.asarray(inner)]))
    x, wx = np.polynomial.legendre.leggauss(spec.nodes_per_panel)
    left, right = edges[:-1], edges[1:]
    half = 0.5 * (right - left)
    mid = 0.5 * (right + left)
    z_int = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    w_int = (half[:, None] * wx[None, :]).ravel() * np.exp(-0.5 * z_int * z_int) / np.sqrt(2.0 * np.pi)
    # normalise the interior mass to exactly 1 - 2*clip so constants integrate exactly
    w_int *= (1.0 - 2.0 * clip) / w_int.sum()
    t = np.concatenate([[clip], ndtr(z_int), [1.0 - clip]])
    z = np.concatenate([[z_lo], z_int, [z_hi]])
    w = np.concatenate([[clip], w_int, [clip]])
    return QuadratureGrid(spec=spec, breaks=breaks, t=_frozen(t), z=_frozen(z), w=_frozen(w))


def build_grid(quad: Optional[QuadratureSpec] = None, breaks: Iterable[float] = ()) -> QuadratureGrid:
    spec = quad or DEFAULT_QUADRATURE
    key = tuple(sorted({round(float(b), 15) for b in breaks}))
    return _build_grid(spec, key)


def grid_for(quad: Optional[QuadratureSpec], *curves: "QuantileCurve") -> QuadratureGrid:
    breaks: List[float] = []
    for c in curves:
        breaks.extend(c.breakpoints)
    return build_grid(quad, breaks)


# ---- Curves ----

def _check_t(t: Any) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise DomainError(f"quantile level must lie in (0,1), got {t!r}")
    return arr


class QuantileCurve:
    """Left-continuous, non-decreasing, non-negative function on (0,1)."""

    kind: str = "abstract"

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        return ()

    @property
    def bounded(self) -> bool:
        return False

    @property
    def square_integrable(self) -> bool:
        return True

    def _eval(self, t: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def __call__(self, t: Any) -> Any:
        arr = _check_t(t)
        out = self._eval(np.atleast_1d(arr))
        return float(out[0]) if np.ndim(t) == 0 else out.reshape(arr.shape)

    def on_grid(self, grid: QuadratureGrid) -> np.ndarray:
        return self._eval(grid.t)

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind}


@dataclass(frozen=True)
class ConstantCurve(QuantileCurve):
    level: float = 1.0
    kind: str = field(default="constant", init=False, repr=False)

    def __post_init__(self) -> None:
        if not np.isfinite(self.level) or self.level < 0:
            raise DomainError(f"constant level must be finite and >= 0, got {self.level!r}")

    @property
    def bounded(self) -> bool:
        return True

    def _eval(self, t: np.ndarray) -> np.ndarray:
        return np.full(t.shape, float(self.level))

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "level": self.level}


@dataclass(frozen=True)
class LognormalCurve(QuantileCurve):
    mu: float = 0.0
    sigma: float = 1.0
    kind: str = field(default="lognormal", init=False, repr=False)

    def __post_init__(self) -> None:
        if not (np.isfinite(self.mu) and np.isfinite(self.sigma)) or self.sigma < 0:
            raise DomainError(f"lognormal needs finite mu and sigma >= 0, got ({self.mu}, {self.sigma})")

    @property
    def bounded(self) -> bool:
        return self.sigma == 0

    def _eval(self, t: np.ndarray) -> np.ndarray:
        return np.exp(self.mu + self.sigma * ndtri(t))

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class AffineLognormalCurve(QuantileCurve):
    """weight * exp(mu + sigma * Phi^-1(t)) + shift."""

    weight: float = 1.0
    mu: float = 0.0
    sigma: float = 1.0
    shift: float = 0.0
    kind: str = field(default="affine_lognormal", init=False, repr=False)

    def __post_init__(self) -> None:
        if self.weight < 0 or self.sigma < 0 or self.shift < 0:
            raise DomainError("affine lognormal needs weight, sigma, shift >= 0")

    @property
    def bounded(self) -> bool:
        return self.weight == 0 or self.sigma == 0

    def _eval(self, t: np.ndarray) -> np.ndarray:
        return self.weight * np.exp(self.mu + self.sigma * ndtri(t)) + self.shift

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "weight": self.weight, "mu": self.mu, "sigma": self.sigma, "shift": self.shift}


@dataclass(frozen=True)
class StepCurve(QuantileCurve):
    """levels[j] on (breaks[j-1], breaks[j]]; value at a breakpoint is the lower level."""

    levels: Tuple[float, ...] = (0.0,)
    breaks: Tuple[float, ...] = ()
    kind: str = field(default="step", init=False, repr=False)

    def __post_init__(self) -> None:
        levels = tuple(float(x) for x in self.levels)
        breaks = tuple(float(x) for x in self.breaks)
        if len(levels) != len(breaks) + 1:
            raise DomainError(f"step curve needs len(levels) == len(breaks) + 1, got {len(levels)} and {len(breaks)}")
        if any(b <= 0.0 or b >= 1.0 for b in breaks) or any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
            raise DomainError(f"step breakpoints must be strictly increasing in (0,1), got {breaks}")
        if any(lv < 0 for lv in levels) or any(l2 < l1 for l1, l2 in zip(levels, levels[1:])):
            raise DomainError(f"step levels must be non-negative and sorted, got {levels}")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "breaks", breaks)

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        return self.breaks

    @property
    def bounded(self) -> bool:
        return True

    def _eval(self, t: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(np.asarray(self.breaks), t, side="left")
        return np.asarray(self.levels)[idx]

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "levels": list(self.levels), "breaks": list(self.breaks)}


@dataclass(frozen=True, eq=False)
class TabulatedCurve(QuantileCurve):
    """Piecewise-linear between nodes, constant outside the node range."""

    nodes: Tuple[float, ...] = ()
    values: Tuple[float, ...] = ()
    kind: str = field(default="tabulated", init=False, repr=False)

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if nodes.ndim != 1 or nodes.size < 1 or nodes.shape != values.shape:
            raise DomainError("tabulated curve needs equally long, non-empty node and value lists")
        if np.any((nodes <= 0) | (nodes >= 1)) or np.any(np.diff(nodes) <= 0):
            raise DomainError("tabulated nodes must be strictly increasing in (0,1)")
        if np.any(~np.isfinite(values)) or np.any(values < 0) or np.any(np.diff(values) < 0):
            raise DomainError("tabulated values must be finite, non-negative and non-decreasing")
        object.__setattr__(self, "nodes", tuple(nodes.tolist()))
        object.__setattr__(self, "values", tuple(values.tolist()))

    @property
    def bounded(self) -> bool:
        return True

    def _eval(self, t: np.ndarray) -> np.ndarray:
        return np.interp(t, np.asarray(self.nodes), np.asarray(self.values))

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "nodes": list(self.nodes), "values": list(self.values)}


class ClosedFormCurve(QuantileCurve):
    """Curve backed by an array evaluator, with values cached per quadrature grid."""

    kind = "closed_form"

    def __init__(
        self,
        evaluator: Callable[[np.ndarray], np.ndarray],
        *,
        label: str = "closed_form",
        bounded: bool = False,
        square_integrable: bool = True,
        breakpoints: Sequence[float] = (),
    ):
        self._evaluator = evaluator
        self._cache: Dict[Any, np.ndarray] = {}
        self.label = label
        self._bounded = bounded
        self._square_integrable = square_integrable
        self._breakpoints = tuple(breakpoints)

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        return self._breakpoints

    @property
    def bounded(self) -> bool:
        return self._bounded

    @property
    def square_integrable(self) -> bool:
        return self._square_integrable

    def _eval(self, t: np.ndarray) -> np.ndarray:
        return np.asarray(self._evaluator(t), dtype=float)

    def on_grid(self, grid: QuadratureGrid) -> np.ndarray:
        vals = self._cache.get(grid.key)
        if vals is None:
            vals = _frozen(np.array(self._eval(grid.t), dtype=float))
            self._cache[grid.key] = vals
        return vals

    def prime(self, grid: QuadratureGrid, values: np.ndarray) -> None:
        self._cache[grid.key] = _frozen(np.array(values, dtype=float))

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "label": self.label}


def evaluate(curve: QuantileCurve, t: Any) -> Any:
    return curve(t)


# ---- Functionals ----

def cost_functional(
    curve: QuantileCurve,
    market: "MarketModel",
    quad: Optional[QuadratureSpec] = None,
    *,
    grid: Optional[QuadratureGrid] = None,
) -> float:
    """Price of the cost-efficient payoff with quantile function `curve`."""
    g = grid or grid_for(quad, curve)
    return g.integrate(curve.on_grid(g), weights=market.pricing_weights(g), what="cost integrand")


def expected_utility(
    curve: QuantileCurve,
    utility: "UtilitySpec",
    quad: Optional[QuadratureSpec] = None,
    *,
    grid: Optional[QuadratureGrid] = None,
) -> float:
    g = grid or grid_for(quad, curve)
    vals = curve.on_grid(g)
    bad = ~(vals > 0) if utility.gamma >= 1 else (vals < 0)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise IntegrationError(
            f"utility undefined for wealth {vals[i]!r} at t={g.t[i]:.6g}", node=float(g.t[i]), value=float(vals[i])
        )
    with np.errstate(divide="ignore"):
        at_zero = -1.0 / (1.0 - utility.gamma) if utility.gamma < 1 else -np.inf
        u = np.where(vals > 0, utility.utility(np.where(vals > 0, vals, 1.0)), at_zero)
    return g.integrate(u, what="utility")


def curve_mean(curve: QuantileCurve, quad: Optional[QuadratureSpec] = None) -> float:
    g = grid_for(quad, curve)
    return g.integrate(curve.on_grid(g))


def crossing_probability(curve: QuantileCurve, benchmark: QuantileCurve, points: int = 1000) -> float:
    """Measure of {t : curve(t) < benchmark(t)}, sign changes refined by brentq."""
    ts = np.arange(1, points + 1) / (points + 1.0)
    diff = curve(ts) - benchmark(ts)
    below = diff < 0

    def f(t: float) -> float:
        return float(curve(t) - benchmark(t))

    edges: List[float] = [0.0]
    for i in np.flatnonzero(below[1:] != below[:-1]):
        a, b = float(ts[i]), float(ts[i + 1])
        try:
            edges.append(brentq(f, a, b, xtol=1e-14))
        except ValueError:
            # a jump, not a zero: the switch happens at the left-continuous breakpoint
            edges.append(0.5 * (a + b))
    edges.append(1.0)
    # segments alternate starting with the state at the first grid node
    total = 0.0
    state = bool(below[0])
    for lo, hi in zip(edges[:-1], edges[1:]):
        if state:
            total += hi - lo
        state = not state
    return total


def curve_table(curve: QuantileCurve, points: int = 1000) -> Tuple[np.ndarray, np.ndarray]:
    ts = np.arange(1, points + 1) / (points + 1.0)
    return ts, np.asarray(curve(ts), dtype=float)
