"""Acceptable strategies, their terminal quantile curves, and the selection of
the divergence tolerance as the largest divergence among them."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from .bregman import BregmanGenerator, bw_divergence
from .errors import DomainError
from .market import MarketModel
from .quantile import (
    AffineLognormalCurve,
    ConstantCurve,
    LognormalCurve,
    QuadratureSpec,
    QuantileCurve,
    StepCurve,
    TabulatedCurve,
)

logger = logging.getLogger(__name__)

STRATEGY_KINDS = ("constant_mix", "buy_and_hold", "digital")
BREAKPOINTS = ("physical", "risk_neutral")


@dataclass(frozen=True)
class StrategySpec:
    """One acceptable strategy.

    digital: pays `low` on the states where S_T falls below c, with Q(S_T < c) = q,
    and a high level set so the price equals the budget. `breakpoint` chooses
    where the jump sits in quantile space: at P(S_T < c) ("physical") or at q.
    """

    kind: str
    market: MarketModel = field(default_factory=MarketModel)
    weight: float = 0.0
    low: float = 0.0
    q: float = 0.05
    breakpoint: str = "physical"
    budget: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in STRATEGY_KINDS:
            raise DomainError(f"unknown strategy kind {self.kind!r}; expected one of {STRATEGY_KINDS}")
        if not (0.0 <= self.weight <= 1.0):
            raise DomainError(f"stock fraction must lie in [0,1], got {self.weight}")
        if not (0.0 < self.q < 1.0):
            raise DomainError(f"digital probability q must lie in (0,1), got {self.q}")
        if self.low < 0:
            raise DomainError(f"digital low level must be >= 0, got {self.low}")
        if self.breakpoint not in BREAKPOINTS:
            raise DomainError(f"breakpoint must be one of {BREAKPOINTS}, got {self.breakpoint!r}")
        if self.budget <= 0:
            raise DomainError(f"budget must be > 0, got {self.budget}")
        if self.kind == "digital" and self.digital_high < self.low:
            raise DomainError(
                f"digital low level {self.low} exceeds the budget-implied high level {self.digital_high:.6g}"
            )

    @property
    def digital_high(self) -> float:
        return (self.budget * self.market.growth - self.low * self.q) / (1.0 - self.q)

    @property
    def digital_jump(self) -> float:
        """Quantile level at which the digital curve jumps from low to high."""
        if self.breakpoint == "risk_neutral":
            return self.q
        c = self.market.stock_quantile(self.q, "Q")
        return float(self.market.stock_cdf(c, "P"))

    def describe(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"kind": self.kind, "name": strategy_name(self)}
        if self.kind == "digital":
            out.update(low=self.low, q=self.q, high=self.digital_high, breakpoint=self.breakpoint, jump=self.digital_jump)
        else:
            out["weight"] = self.weight
        return out


def strategy_name(strategy: StrategySpec) -> str:
    if strategy.kind == "constant_mix":
        return f"constant-mix {strategy.weight:.1%}"
    if strategy.kind == "buy_and_hold":
        return f"buy-and-hold {strategy.weight:.1%}"
    return f"digital low={strategy.low:g} q={strategy.q:g}"


def strategy_quantile(strategy: StrategySpec) -> QuantileCurve:
    m = strategy.market
    x0 = strategy.budget
    w = strategy.weight
    if strategy.kind == "constant_mix":
        if w == 0:
            return ConstantCurve(x0 * m.growth)
        mu1 = (m.r + (m.mu_s - m.r) * w - 0.5 * w * w * m.sigma_s ** 2) * m.T
        sigma1 = w * m.sigma_s * math.sqrt(m.T)
        return LognormalCurve(mu=math.log(x0) + mu1, sigma=sigma1)
    if strategy.kind == "buy_and_hold":
        if w == 0:
            return ConstantCurve(x0 * m.growth)
        mu2 = (m.mu_s - 0.5 * m.sigma_s ** 2) * m.T
        sigma2 = m.sigma_s * math.sqrt(m.T)
        return AffineLognormalCurve(weight=x0 * w, mu=mu2, sigma=sigma2, shift=x0 * (1.0 - w) * m.growth)
    return StepCurve(levels=(strategy.low, strategy.digital_high), breaks=(strategy.digital_jump,))


def divergence_row(
    strategies: Sequence[StrategySpec],
    benchmark: QuantileCurve,
    generator: BregmanGenerator,
    quad: Optional[QuadratureSpec] = None,
) -> List[float]:
    return [bw_divergence(strategy_quantile(s), benchmark, generator, quad) for s in strategies]


def select_tolerance(
    strategies: Sequence[StrategySpec],
    benchmark: QuantileCurve,
    generator: BregmanGenerator,
    quad: Optional[QuadratureSpec] = None,
) -> float:
    """Largest divergence from the benchmark among the acceptable strategies."""
    if not strategies:
        raise DomainError("tolerance selection needs at least one acceptable strategy")
    row = divergence_row(strategies, benchmark, generator, quad)
    eps = max(row)
    logger.debug("tolerance for %s: %s -> %.6g", generator.label, ["%.6g" % v for v in row], eps)
    return eps


# ---- presets ----

@dataclass(frozen=True)
class Preset:
    name: str
    benchmark: Dict[str, Any]
    strategies: List[Dict[str, Any]]


PRESETS: Dict[str, Preset] = {
    "example1": Preset(
        name="example1",
        benchmark={"kind": "constant", "level": 1.0},
        strategies=[
            {"kind": "constant_mix", "weight": 0.175},
            {"kind": "buy_and_hold", "weight": 0.15},
            {"kind": "digital", "low": 0.9, "q": 0.05, "breakpoint": "risk_neutral"},
        ],
    ),
    "example2": Preset(
        name="example2",
        benchmark={"kind": "constant_mix", "weight": 0.8},
        strategies=[
            {"kind": "constant_mix", "weight": 0.75},
            {"kind": "buy_and_hold", "weight": 0.85},
            {"kind": "digital", "low": 0.8, "q": 0.1, "breakpoint": "risk_neutral"},
        ],
    ),
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise DomainError(f"unknown strategy preset {name!r}; available: {sorted(PRESETS)}") from None


def build_strategy(block: Dict[str, Any], market: MarketModel, budget: float = 1.0) -> StrategySpec:
    params = {k: v for k, v in block.items() if k != "kind"}
    allowed = {"weight", "low", "q", "breakpoint"}
    extra = set(params) - allowed
    if extra:
        raise DomainError(f"unknown strategy fields {sorted(extra)}")
    return StrategySpec(kind=block.get("kind", ""), market=market, budget=budget, **params)


def build_curve(block: Dict[str, Any], market: MarketModel, budget: float = 1.0) -> QuantileCurve:
    """Benchmark/curve from a config block: a parametric curve or a strategy kind."""
    kind = block.get("kind")
    params = {k: v for k, v in block.items() if k != "kind"}
    try:
        if kind in STRATEGY_KINDS:
            return strategy_quantile(build_strategy(block, market, budget))
        if kind == "constant":
            return ConstantCurve(**params)
        if kind == "lognormal":
            return LognormalCurve(**params)
        if kind == "affine_lognormal":
            return AffineLognormalCurve(**params)
        if kind == "step":
            return StepCurve(levels=tuple(params.get("levels", ())), breaks=tuple(params.get("breaks", ())))
        if kind == "tabulated":
            return TabulatedCurve(nodes=tuple(params.get("nodes", ())), values=tuple(params.get("values", ())))
    except TypeError as e:
        raise DomainError(f"bad parameters for curve kind {kind!r}: {e}") from e
    raise DomainError(f"unknown curve kind {kind!r}")
