from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .bregman import BregmanGenerator, make_generator
from .errors import BWPayoffError, ConfigError
from .market import MarketModel
from .preferences import UtilitySpec
from .quantile import QuadratureSpec, QuantileCurve
from .strategies import PRESETS, StrategySpec, build_curve, build_strategy, get_preset

TOP_LEVEL_KEYS = {
    "market",
    "utility",
    "generators",
    "benchmark",
    "budget",
    "tolerance",
    "strategies",
    "quadrature",
    "stock_grid",
    "quantile_grid",
    "output",
}
TOLERANCE_MODES = ("explicit", "select", "infinite")
DEFAULT_GENERATORS = [{"kind": "quadratic"}, {"kind": "entropic"}]


def _try_json(text: str) -> Optional[Dict[str, Any]]:
    try:
        data = json.loads(text)
    except ValueError:
        return None
    return data if isinstance(data, dict) else None


def _try_yaml(text: str) -> Optional[Dict[str, Any]]:
    try:
        import yaml  # type: ignore
    except ImportError:
        return None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError:
        return None
    return data if isinstance(data, dict) else None


def load_config(path: str | Path) -> Dict[str, Any]:
    """Read a config file: strict JSON first, then YAML."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {p}: {e}") from e
    if not text.strip():
        return {}
    raw = _try_json(text)
    if raw is None:
        raw = _try_yaml(text)
    if raw is None:
        raise ConfigError(f"config {p} is neither a JSON nor a YAML mapping")
    return raw


def _num(value: Any, name: str, *, positive: bool = False, allow_inf: bool = False) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None
    if math.isnan(v) or (math.isinf(v) and not allow_inf):
        raise ConfigError(f"{name} must be finite, got {value!r}")
    if positive and v <= 0:
        raise ConfigError(f"{name} must be > 0, got {value!r}")
    return v


def _block(raw: Dict[str, Any], key: str) -> Dict[str, Any]:
    value = raw.get(key, {})
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"'{key}' must be a mapping, got {type(value).__name__}")
    return dict(value)


def _only(block: Dict[str, Any], allowed: set, where: str) -> None:
    extra = set(block) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


@dataclass
class ExperimentConfig:
    market: MarketModel
    gammas: List[float]
    generators: List[BregmanGenerator]
    benchmark: QuantileCurve
    benchmark_block: Dict[str, Any]
    budget: float
    tolerance_mode: str
    epsilon: float
    strategies: List[StrategySpec]
    preset: Optional[str]
    quad: QuadratureSpec
    stock_grid: Tuple[float, float, int]
    quantile_points: int
    out_dir: Path
    raw: Dict[str, Any] = field(default_factory=dict)

    @property
    def utilities(self) -> List[UtilitySpec]:
        return [UtilitySpec(g) for g in self.gammas]

    def describe(self) -> Dict[str, Any]:
        return {
            "market": self.market.describe(),
            "gammas": list(self.gammas),
            "generators": [g.describe() for g in self.generators],
            "benchmark": dict(self.benchmark_block),
            "budget": self.budget,
            "tolerance": {"mode": self.tolerance_mode, "epsilon": None if math.isinf(self.epsilon) else self.epsilon},
            "strategies": self.preset or [s.describe() for s in self.strategies],
            "quadrature": {"panels": self.quad.panels, "nodes_per_panel": self.quad.nodes_per_panel, "clip": self.quad.clip},
            "stock_grid": list(self.stock_grid),
            "quantile_points": self.quantile_points,
        }


def normalize_config(raw: Optional[Dict[str, Any]], **overrides: Any) -> ExperimentConfig:
    """Validate a raw config mapping, fill defaults and build the domain objects.

    Keyword overrides (out_dir, panels, grid_points) mirror the CLI flags and take
    precedence over the file.
    """
    raw = dict(raw or {})
    _only(raw, TOP_LEVEL_KEYS, "config")
    try:
        return _normalize(raw, overrides)
    except ConfigError:
        raise
    except BWPayoffError as e:
        raise ConfigError(str(e)) from e


def _normalize(raw: Dict[str, Any], overrides: Dict[str, Any]) -> ExperimentConfig:
    mk = _block(raw, "market")
    _only(mk, {"r", "mu_s", "sigma_s", "T", "S0"}, "market")
    market = MarketModel(**{k: _num(v, f"market.{k}") for k, v in mk.items()})

    ut = _block(raw, "utility")
    _only(ut, {"gamma"}, "utility")
    gam = ut.get("gamma", 1.0)
    gammas = [_num(g, "utility.gamma", positive=True) for g in (gam if isinstance(gam, list) else [gam])]
    if not gammas:
        raise ConfigError("utility.gamma list is empty")

    gen_blocks = raw.get("generators", DEFAULT_GENERATORS)
    if not isinstance(gen_blocks, list) or not gen_blocks:
        raise ConfigError("'generators' must be a non-empty list")
    generators = []
    for i, gb in enumerate(gen_blocks):
        if not isinstance(gb, dict) or "kind" not in gb:
            raise ConfigError(f"generators[{i}] must be a mapping with a 'kind'")
        _only(gb, {"kind", "base", "alpha", "theta"}, f"generators[{i}]")
        generators.append(
            make_generator(
                gb["kind"],
                base=gb.get("base"),
                alpha=None if gb.get("alpha") is None else _num(gb["alpha"], f"generators[{i}].alpha", positive=True),
                theta=None if gb.get("theta") is None else _num(gb["theta"], f"generators[{i}].theta"),
            )
        )

    budget = _num(raw.get("budget", 1.0), "budget", positive=True)

    strat_raw = raw.get("strategies", "example1")
    preset: Optional[str] = None
    if isinstance(strat_raw, str):
        if strat_raw not in PRESETS:
            raise ConfigError(f"unknown strategy preset {strat_raw!r}; available: {sorted(PRESETS)}")
        preset = strat_raw
        strat_blocks = get_preset(preset).strategies
    elif isinstance(strat_raw, list):
        strat_blocks = strat_raw
    else:
        raise ConfigError("'strategies' must be a preset name or a list of strategy blocks")
    strategies = []
    for i, sb in enumerate(strat_blocks):
        if not isinstance(sb, dict):
            raise ConfigError(f"strategies[{i}] must be a mapping")
        strategies.append(build_strategy(sb, market, budget))

    bench_block = _block(raw, "benchmark") or (
        dict(get_preset(preset).benchmark) if preset else {"kind": "constant", "level": 1.0}
    )
    if "kind" not in bench_block:
        raise ConfigError("benchmark block needs a 'kind'")
    benchmark = build_curve(bench_block, market, budget)

    tol = _block(raw, "tolerance")
    _only(tol, {"mode", "epsilon"}, "tolerance")
    mode = tol.get("mode", "explicit" if "epsilon" in tol else "select")
    if mode not in TOLERANCE_MODES:
        raise ConfigError(f"tolerance.mode must be one of {TOLERANCE_MODES}, got {mode!r}")
    epsilon = math.inf
    if mode == "explicit":
        if "epsilon" not in tol:
            raise ConfigError("tolerance.mode 'explicit' needs tolerance.epsilon")
        epsilon = _num(tol["epsilon"], "tolerance.epsilon", positive=True)
    elif mode == "select" and not strategies:
        raise ConfigError("tolerance.mode 'select' needs at least one acceptable strategy")

    qd = _block(raw, "quadrature")
    _only(qd, {"panels", "nodes_per_panel", "clip"}, "quadrature")
    panels = overrides.get("panels") or qd.get("panels", 256)
    quad = QuadratureSpec(
        panels=int(_num(panels, "quadrature.panels", positive=True)),
        nodes_per_panel=int(_num(qd.get("nodes_per_panel", 4), "quadrature.nodes_per_panel", positive=True)),
        clip=_num(qd.get("clip", 1e-6), "quadrature.clip", positive=True),
    )

    sg = _block(raw, "stock_grid")
    _only(sg, {"lo", "hi", "points"}, "stock_grid")
    s_lo = _num(sg.get("lo", 0.05), "stock_grid.lo", positive=True)
    s_hi = _num(sg.get("hi", 2.5), "stock_grid.hi", positive=True)
    s_pts = int(_num(sg.get("points", 400), "stock_grid.points", positive=True))
    if s_hi <= s_lo or s_pts < 2:
        raise ConfigError("stock_grid needs lo < hi and at least 2 points")

    qg = _block(raw, "quantile_grid")
    _only(qg, {"points"}, "quantile_grid")
    q_pts = overrides.get("grid_points") or qg.get("points", 1000)
    q_pts = int(_num(q_pts, "quantile_grid.points", positive=True))

    outb = _block(raw, "output")
    _only(outb, {"dir"}, "output")
    out_dir = Path(overrides.get("out_dir") or outb.get("dir") or "out")

    return ExperimentConfig(
        market=market,
        gammas=gammas,
        generators=generators,
        benchmark=benchmark,
        benchmark_block=bench_block,
        budget=budget,
        tolerance_mode=mode,
        epsilon=epsilon,
        strategies=strategies,
        preset=preset,
        quad=quad,
        stock_grid=(s_lo, s_hi, s_pts),
        quantile_points=q_pts,
        out_dir=out_dir,
        raw=raw,
    )
